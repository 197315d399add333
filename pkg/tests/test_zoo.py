import numpy as np
import pytest

from srcurv import zoo
from srcurv.canonical import ricci_at
from srcurv.connections import connection_by_name
from srcurv.lq import unit_covectors
from srcurv.twist import classify

ENTRIES = sorted(zoo.registry())


@pytest.mark.parametrize("name", ENTRIES)
def test_declared_invariants_match_pipeline(name):
    e = zoo.get(name)
    for kind in e.connections:
        conn = connection_by_name(e.model, kind)
        for p in unit_covectors(e.model, 4, seed=11, h_max=2.0, box=e.sample_box):
            r = ricci_at(conn, p)
            for key, (f, _) in e.invariants.items():
                if key in r:
                    assert r[key] == pytest.approx(f(p), rel=1e-6, abs=1e-8), (name, kind, key)


@pytest.mark.parametrize("name", ENTRIES)
def test_maximal_diagram_is_generic(name):
    e = zoo.get(name)
    conn = connection_by_name(e.model, "nice")
    p = unit_covectors(e.model, 3, seed=2, box=e.sample_box)[1]
    c = classify(e.model, conn, p, maximal_diagram=e.maximal_diagram)
    assert c.in_sigma


def test_quaternion_relations():
    I, J, K = zoo.quaternion_matrices(1)
    for M in (I, J, K):
        assert np.allclose(M @ M, -np.eye(4))
        assert np.allclose(M, -M.T)
    assert np.allclose(I @ J, K)


def test_contact_with_negative_curvature():
    m = zoo.contact3d(-1.0)
    conn = connection_by_name(m, "nice")
    from srcurv.model import CovectorPoint

    r = ricci_at(conn, CovectorPoint([0.2, 0.0, 0.0], [0.6, 0.8, 1.5]))
    assert r["Ric(1,1)"] == pytest.approx(-1 + 1.5 ** 2, abs=1e-8)


def test_unknown():
    with pytest.raises(KeyError):
        zoo.get("nope")
