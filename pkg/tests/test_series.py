import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srcurv.series import Series, einsum, exp, inv, log, pinv_rank, sincos

L = 6
coef = arrays(np.float64, (L,), elements=st.floats(-2, 2))


def taylor(f, t0=0.0, L=L, h=0.05):
    """Taylor coefficients of a scalar function by sampled polynomial fit (low order only)."""
    ts = h * np.cos(np.pi * (np.arange(4 * L) + 0.5) / (4 * L))
    c = np.polynomial.polynomial.polyfit(ts, [f(t) for t in ts], L - 1)
    return c


def evaluate(s: Series, t):
    return sum(s.c[k] * t ** k for k in range(s.L))


@given(coef, coef)
def test_product_matches_polynomial_product(a, b):
    got = (Series(a) * Series(b)).c
    assert np.allclose(got, np.polynomial.polynomial.polymul(a, b)[:L], atol=1e-12)


@given(coef)
def test_reciprocal_and_log_exp_roundtrip(a):
    a = a.copy()
    a[0] = 1.5 + abs(a[0])
    s = Series(a)
    one = (s * s.reciprocal()).c
    assert np.allclose(one, np.eye(L)[0], atol=1e-9)
    assert np.allclose(exp(log(s)).c, a, atol=1e-9)


@given(coef)
def test_sin_cos_identity(a):
    s, c = sincos(Series(a))
    assert np.allclose((s * s + c * c).c, np.eye(L)[0], atol=1e-9)


def test_known_expansions():
    t = Series(np.array([0.0, 1.0, 0, 0, 0, 0]))
    fact = np.array([1, 1, 2, 6, 24, 120.0])
    assert np.allclose(exp(t).c, 1 / fact)
    assert np.allclose(((1 + t) ** 0.5).c[:3], [1, 0.5, -0.125])
    assert np.allclose(sincos(t)[0].c, [0, 1, 0, -1 / 6, 0, 1 / 120])


def test_diff_and_integrate():
    s = Series(np.arange(1.0, 7.0))
    assert np.allclose(s.diff().c, [2, 6, 12, 20, 30])
    assert np.allclose(s.diff().integrate(1.0).c, s.c[:6])


@given(arrays(np.float64, (L, 3, 3), elements=st.floats(-1, 1)))
def test_matrix_inverse(a):
    a = a.copy()
    a[0] += 4 * np.eye(3)
    s = Series(a)
    prod = (s @ inv(s)).c
    want = np.zeros_like(prod)
    want[0] = np.eye(3)
    assert np.allclose(prod, want, atol=1e-9)


def test_einsum_matches_matmul(rng):
    a = Series(rng.standard_normal((L, 3, 4)))
    b = Series(rng.standard_normal((L, 4, 2)))
    assert np.allclose(einsum("ij,jk->ik", a, b).c, (a @ b).c)
    m = rng.standard_normal((2, 5))
    assert np.allclose(einsum("ij,jk->ik", b, m).c, (b @ m).c)


def test_pinv_rank_matches_finite_differences(rng):
    # rank-2 family U(t) diag V(t)^T of shape 4x3
    U = Series(rng.standard_normal((L, 4, 2)) * 0.5 ** np.arange(L)[:, None, None])
    V = Series(rng.standard_normal((L, 3, 2)) * 0.5 ** np.arange(L)[:, None, None])
    A = U @ V.T
    P = pinv_rank(A, 2)
    for t in (0.0, 0.01, -0.02):
        assert np.allclose(evaluate(P, t), np.linalg.pinv(evaluate(A, t), rcond=1e-10), atol=1e-6)
    h = 1e-5
    d1 = (np.linalg.pinv(evaluate(A, h)) - np.linalg.pinv(evaluate(A, -h))) / (2 * h)
    assert np.allclose(P.c[1], d1, rtol=1e-6, atol=1e-6)


def test_numpy_operands_defer_to_series():
    s = Series(np.ones((3, 2, 2)))
    m = np.eye(2)
    assert isinstance(m @ s, Series)
    assert isinstance(m + s, Series)
    assert isinstance(2.0 * s, Series)
