import numpy as np
import pytest

from srcurv import zoo
from srcurv.connections import (adjoint, check_compatibility, connection_by_name, curvature, torsion,
                                validate_identities)
from srcurv.model import structure_constants

PAIRS = [(n, c) for n, e in sorted(zoo.registry().items()) for c in e.connections]


def _points(model, rng, k=3):
    lo, hi = model.domain[:, 0] / 4, model.domain[:, 1] / 4
    return [lo + (hi - lo) * rng.random(model.n) for _ in range(k)]


@pytest.mark.parametrize("name,kind", PAIRS)
def test_compatible_and_identities(name, kind, rng):
    m = zoo.get(name).model
    conn = connection_by_name(m, kind)
    pts = _points(m, rng)
    for x in pts:
        assert check_compatibility(conn, x)["ok"]
    rep = validate_identities(conn, pts, tol=1e-8)
    assert rep.ok, rep.to_dict()


@pytest.mark.parametrize("name,kind", PAIRS)
def test_horizontal_torsion_is_minus_vertical_bracket(name, kind, rng):
    m = zoo.get(name).model
    conn = connection_by_name(m, kind)
    d = m.d1
    for x in _points(m, rng, 2):
        T = torsion(conn, x)
        c = structure_constants(m, x)
        assert np.allclose(T[d:, :d, :d], -c[d:, :d, :d], atol=1e-12)


def test_group_connection_on_heisenberg():
    m = zoo.heisenberg()
    conn = connection_by_name(m, "group")
    x = [0.4, -0.2, 1.0]
    assert np.allclose(conn.christoffel(x), 0)
    assert np.allclose(curvature(conn, x), 0)
    T = torsion(conn, x)
    assert T[2, 0, 1] == pytest.approx(-1.0)


def test_adjoint_involution(rng):
    m = zoo.se2()
    conn = connection_by_name(m, "nice")
    x = _points(m, rng, 1)[0]
    a = adjoint(conn)
    assert np.allclose(a.christoffel(x), conn.christoffel(x) - torsion(conn, x))
    assert np.allclose(adjoint(a).christoffel(x), conn.christoffel(x))
    assert np.allclose(torsion(a, x), -torsion(conn, x))


def test_unknown_connection():
    with pytest.raises(ValueError):
        connection_by_name(zoo.heisenberg(), "levi")
