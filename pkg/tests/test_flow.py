import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import heisenberg_geodesic
from srcurv import zoo
from srcurv.connections import connection_by_name
from srcurv.flow import integrate_extremal, parallel_transport
from srcurv.model import CovectorPoint


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_heisenberg_extremal_closed_form(a, b, h):
    if a * a + b * b < 1e-4:
        return
    m = zoo.heisenberg()
    conn = connection_by_name(m, "nice")
    ts = np.linspace(0, 2.0, 5)
    ext = integrate_extremal(m, conn, CovectorPoint(np.zeros(3), np.array([a, b, h])), 2.0, t_eval=ts)
    for t in ts:
        x, H = heisenberg_geodesic((a, b, h), t)
        assert np.allclose(ext.x(t), x, atol=1e-8)
        assert np.allclose(ext.H(t), H, atol=1e-8)


@pytest.mark.parametrize("name", ["contact3d", "se2", "martinet", "quaternionic_heisenberg1"])
def test_energy_conserved(name, rng):
    e = zoo.get(name)
    conn = connection_by_name(e.model, "nice")
    H = rng.standard_normal(e.model.n)
    ext = integrate_extremal(e.model, conn, CovectorPoint(np.zeros(e.model.n) + 0.1, H), 3.0)
    assert ext.energy_drift() <= 1e-9


def test_backwards_and_exit():
    m = zoo.contact3d()
    conn = connection_by_name(m, "nice")
    p = CovectorPoint([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    ext = integrate_extremal(m, conn, p, -0.5)
    assert ext.x(-0.5)[0] == pytest.approx(-0.5)
    long = integrate_extremal(m, conn, p, 10.0)
    assert long.exited and long.t_end < 10.0
    with pytest.raises(ValueError):
        integrate_extremal(m, conn, p, 0.0)


def test_transport_preserves_metric_on_E(rng):
    m = zoo.se2()
    conn = connection_by_name(m, "nice")
    p = CovectorPoint(np.zeros(3), np.array([0.6, 0.8, 1.5]))
    ext = integrate_extremal(m, conn, p, 2.0)
    tr = parallel_transport(conn, ext, [0.5, 1.0, 2.0])
    for M in tr.M:
        E = M[:2, :2]
        assert np.allclose(E.T @ E, np.eye(2), atol=1e-9)
        assert np.allclose(M[2:, :2], 0, atol=1e-12)


def test_group_transport_is_trivial():
    m = zoo.heisenberg()
    conn = connection_by_name(m, "group")
    ext = integrate_extremal(m, conn, CovectorPoint(np.zeros(3), np.array([1.0, 0.0, 2.0])), 1.0)
    assert np.allclose(parallel_transport(conn, ext, 1.0).at(), np.eye(3))
