import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bracket_fd
from srcurv import zoo
from srcurv.expr import ExpressionError, ScalarExpr
from srcurv.model import (CovectorPoint, DomainError, FrameDegeneracyError, SubRiemannianModel, hamiltonian, sharp,
                          structure_constants)


def test_parse_and_exact_derivative():
    f = ScalarExpr.parse("x1^2*sin(x2) + exp(-x3)/2", 3)
    x = np.array([0.3, -1.2, 0.5])
    assert f(x) == pytest.approx(0.09 * np.sin(-1.2) + np.exp(-0.5) / 2)
    assert f.diff(0)(x) == pytest.approx(0.6 * np.sin(-1.2))
    assert f.diff(0, 1)(x) == pytest.approx(0.6 * np.cos(-1.2))
    assert ScalarExpr.parse("x1 - x1", 2).is_zero()


@pytest.mark.parametrize("text", ["x4", "import os", "x1 +", "sin(x1, x2)", "abs(x1)"])
def test_parse_rejects(text):
    with pytest.raises(ExpressionError):
        ScalarExpr.parse(text, 3)


def test_json_roundtrip(tmp_path):
    m = zoo.martinet()
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    m2 = SubRiemannianModel.from_json(path)
    x = np.array([0.4, 0.1, -0.3])
    assert m2.n == 3 and m2.d1 == 2
    assert np.allclose(m2.frame_matrix(x), m.frame_matrix(x))
    assert np.allclose(m2.domain, m.domain)


def test_domain_and_degeneracy():
    m = zoo.heisenberg()
    with pytest.raises(DomainError):
        m.frame_matrix([100.0, 0, 0])
    deg = SubRiemannianModel("deg", [[1, 0], [0, "x1"]], 1)
    with pytest.raises(FrameDegeneracyError):
        structure_constants(deg, [0.0, 0.0])
    with pytest.raises(ValueError):
        SubRiemannianModel("bad", [[1, 0], [0]], 1)


@pytest.mark.parametrize("name", sorted(zoo.registry()))
def test_structure_constants_match_finite_differences(name, rng):
    e = zoo.get(name)
    m = e.model
    lo, hi = m.domain[:, 0] / 4, m.domain[:, 1] / 4
    for _ in range(3):
        x = lo + (hi - lo) * rng.random(m.n)
        c = structure_constants(m, x)
        assert np.allclose(c, bracket_fd(m, x), atol=1e-7)
        assert np.allclose(c, -np.swapaxes(c, 1, 2))


def test_heisenberg_bracket():
    c = structure_constants(zoo.heisenberg(), [0.3, -0.7, 2.0])
    assert c[2, 0, 1] == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(c) > 1e-14) == 2


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_sharp_and_hamiltonian(H):
    m = zoo.heisenberg()
    p = CovectorPoint(np.zeros(3), np.array(H))
    s = sharp(m, p)
    assert s[2] == 0 and np.allclose(s[:2], H[:2])
    assert hamiltonian(m, p) == pytest.approx(0.5 * (H[0] ** 2 + H[1] ** 2))
    assert hamiltonian(m, p.scaled(2.0)) == pytest.approx(4 * hamiltonian(m, p))


def test_coordinate_momenta_roundtrip(rng):
    m = zoo.contact3d()
    x = np.array([0.2, 0.5, -1.0])
    xi = rng.standard_normal(3)
    p = m.covector_from_coordinates(x, xi)
    assert np.allclose(m.coordinate_momenta(p), xi)
