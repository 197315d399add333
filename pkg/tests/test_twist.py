import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bracket_fd
from srcurv import zoo
from srcurv.connections import connection_by_name
from srcurv.model import CovectorPoint
from srcurv.twist import YoungDiagramData, classify, twist_polynomials


def _conn(name, kind="nice"):
    e = zoo.get(name)
    return e, connection_by_name(e.model, kind)


@pytest.mark.parametrize("name", ["heisenberg", "se2", "martinet", "contact3d", "quaternionic_heisenberg1"])
def test_series_and_jvp_recursions_agree(name, rng):
    e, conn = _conn(name)
    p = CovectorPoint(0.1 * rng.standard_normal(e.model.n), rng.standard_normal(e.model.n))
    a = twist_polynomials(conn, p, 3, method="series").P
    b = twist_polynomials(conn, p, 3, method="jvp").P
    assert np.allclose(a, b, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("name", ["heisenberg", "se2", "martinet", "quaternionic_heisenberg1"])
def test_first_twist_is_vertical_bracket(name, rng):
    e, conn = _conn(name)
    m = e.model
    d = m.d1
    x = 0.2 * rng.standard_normal(m.n)
    H = rng.standard_normal(m.n)
    P = twist_polynomials(conn, CovectorPoint(x, H), 1).P
    c = bracket_fd(m, x)
    want = np.einsum("i,kij->kj", H[:d], c[d:, :d, :d])
    assert np.allclose(P[0], np.eye(m.n))
    assert np.allclose(P[1][d:, :d], want, atol=1e-7)


@given(st.floats(-1.5, 1.5), st.floats(0, 2 * np.pi), st.floats(-2, 2))
def test_martinet_first_twist(x, th, h):
    e, conn = _conn("martinet")
    a, b = np.cos(th), np.sin(th)
    P1 = twist_polynomials(conn, CovectorPoint([x, 0.0, 0.0], [a, b, h]), 1).P[1]
    assert np.allclose(P1[2, :2], 2 * x * np.array([-b, a]), atol=1e-12)


@given(st.floats(0.2, 4.0))
def test_homogeneity(c):
    e, conn = _conn("se2")
    p = CovectorPoint([0.3, -0.1, 0.7], [0.6, -0.8, 1.3])
    P1 = twist_polynomials(conn, p, 3).P
    P2 = twist_polynomials(conn, p.scaled(c), 3).P
    for k in range(4):
        assert np.allclose(P2[k], c ** k * P1[k], rtol=1e-9, atol=1e-10 * c ** k)


@pytest.mark.parametrize("name,columns", [("euclidean", (3,)), ("surface", (2,)), ("heisenberg", (2, 1)),
                                          ("quaternionic_heisenberg", (8, 3)), ("se2", (2, 1))])
def test_generic_diagram(name, columns, rng):
    e, conn = _conn(name)
    u = rng.standard_normal(e.model.n)
    c = classify(e.model, conn, CovectorPoint(np.zeros(e.model.n) + 0.05, u), maximal_diagram=e.maximal_diagram)
    assert c.diagram.columns == columns
    assert c.ample and c.in_sigma and not c.uncertain


def test_martinet_window_detects_nonequiregular():
    e, conn = _conn("martinet")
    # extremal through x = 0 crosses the singular surface
    c = classify(e.model, conn, CovectorPoint([-0.3, 0.0, 0.0], [1.0, 0.0, 0.0]), window=0.6)
    assert not c.equiregular
    c2 = classify(e.model, conn, CovectorPoint([0.5, 0.0, 0.0], [0.0, 1.0, 0.3]), window=0.5)
    assert c2.equiregular and c2.diagram.columns == (2, 1)


def test_zero_covector_is_not_ample():
    e, conn = _conn("heisenberg")
    c = classify(e.model, conn, CovectorPoint(np.zeros(3), [0.0, 0.0, 1.0]))
    assert not c.ample


def test_young_diagram_data():
    d = YoungDiagramData((8, 3), 11)
    assert d.rows == tuple([2] * 3 + [1] * 5)
    assert d.reduced_rows == ((2, 3), (1, 5))
    assert d.reduced == (2, 1) and d.ample and d.label() == "Y(8,3)"
    assert not YoungDiagramData((2,), 3).ample


def test_invalid_order():
    e, conn = _conn("heisenberg")
    with pytest.raises(ValueError):
        twist_polynomials(conn, CovectorPoint(np.zeros(3), [1.0, 0, 0]), 9)
