"""Truncated Taylor series of arrays and the pulled-back calculus along extremals.

A :class:`Series` stores ``c[k]``, the coefficient of ``t^k``, for
``k < L``; products are Cauchy products and every operation truncates to the
shortest operand, so a series of length L is exact through order L-1.

Along a normal extremal every section of a pulled-back tensor bundle becomes
a series in the flow time, and the flow derivative is

    d/dflow f = f' + (connection terms built from G = gamma(sharp p, .))

which lowers the length by one.  Coefficient series of the frame, its
derivatives and the structure constants are obtained by evaluating the
symbolic frame on the polynomial curve ``x(t)`` with the arithmetic below;
the Christoffels then follow by the connection's linear map.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import sympy as sp

from .expr import coordinates


class Series:
    """Truncated power series with array coefficients ``c[k, ...]``."""

    __array_ufunc__ = None

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    # construction -------------------------------------------------------
    @staticmethod
    def const(a, L: int) -> "Series":
        a = np.asarray(a, dtype=float)
        c = np.zeros((L,) + a.shape)
        c[0] = a
        return Series(c)

    @property
    def L(self) -> int:
        return self.c.shape[0]

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def derivative_at_zero(self, k: int) -> np.ndarray:
        """k-th time derivative at 0."""
        return self.c[k] * float(np.prod(np.arange(1, k + 1)))

    def truncate(self, L: int) -> "Series":
        return Series(self.c[:L])

    def __getitem__(self, idx) -> "Series":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Series(self.c[(slice(None),) + idx])

    def __repr__(self):
        return f"Series(L={self.L}, shape={self.shape})"

    # linear operations --------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Series):
            L = min(self.L, other.L)
            return Series(self.c[:L] + other.c[:L])
        c = self.c.copy()
        c[0] = c[0] + other
        return Series(c)

    __radd__ = __add__

    def __neg__(self):
        return Series(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    @property
    def T(self) -> "Series":
        return Series(np.swapaxes(self.c, -1, -2))

    def diff(self) -> "Series":
        """Time derivative; the result is one term shorter."""
        k = np.arange(1, self.L).reshape((-1,) + (1,) * len(self.shape))
        return Series(self.c[1:] * k)

    def integrate(self, c0) -> "Series":
        k = np.arange(1, self.L + 1).reshape((-1,) + (1,) * len(self.shape))
        return Series(np.concatenate([np.asarray(c0, dtype=float)[None], self.c / k]))

    # products -------------------------------------------------------------
    def _cauchy(self, other, op):
        L = min(self.L, other.L)
        first = op(self.c[0], other.c[0])
        out = np.zeros((L,) + np.shape(first))
        for k in range(L):
            for i in range(k + 1):
                out[k] += op(self.c[i], other.c[k - i])
        return Series(out)

    def __mul__(self, other):
        if isinstance(other, Series):
            return self._cauchy(other, np.multiply)
        other = np.asarray(other, dtype=float)
        return Series(self.c * other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Series):
            return self._cauchy(other, np.matmul)
        return Series(np.matmul(self.c, np.asarray(other, dtype=float)))

    def __rmatmul__(self, other):
        return Series(np.matmul(np.asarray(other, dtype=float), self.c))

    def __truediv__(self, other):
        if isinstance(other, Series):
            return self * other.reciprocal()
        return Series(self.c / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Series":
        a = self.c
        b = np.zeros_like(a)
        b[0] = 1.0 / a[0]
        for k in range(1, self.L):
            b[k] = -b[0] * sum(a[j] * b[k - j] for j in range(1, k + 1))
        return Series(b)

    def __pow__(self, p):
        if isinstance(p, Series):
            return exp(p * log(self))
        p = float(p)
        if p == int(p) and p >= 0:
            q = int(p)
            out = Series.const(np.ones(self.shape), self.L)
            base = self
            while q:
                if q & 1:
                    out = out * base
                base = base * base
                q >>= 1
            return out
        if p == int(p):
            return (self ** (-p)).reciprocal()
        a = self.c
        b = np.zeros_like(a)
        b[0] = a[0] ** p
        for k in range(1, self.L):
            b[k] = sum((p * j - (k - j)) * a[j] * b[k - j] for j in range(1, k + 1)) / (k * a[0])
        return Series(b)

    def __rpow__(self, base):
        return exp(self * float(np.log(base)))


def exp(a: Series) -> Series:
    c = a.c
    b = np.zeros_like(c)
    b[0] = np.exp(c[0])
    for k in range(1, a.L):
        b[k] = sum(j * c[j] * b[k - j] for j in range(1, k + 1)) / k
    return Series(b)


def log(a: Series) -> Series:
    c = a.c
    b = np.zeros_like(c)
    b[0] = np.log(c[0])
    for k in range(1, a.L):
        b[k] = (c[k] - sum(j * b[j] * c[k - j] for j in range(1, k)) / k) / c[0]
    return Series(b)


def sincos(a: Series) -> tuple:
    c = a.c
    s = np.zeros_like(c)
    co = np.zeros_like(c)
    s[0], co[0] = np.sin(c[0]), np.cos(c[0])
    for k in range(1, a.L):
        s[k] = sum(j * c[j] * co[k - j] for j in range(1, k + 1)) / k
        co[k] = -sum(j * c[j] * s[k - j] for j in range(1, k + 1)) / k
    return Series(s), Series(co)


def _wrap(f):
    def g(a):
        return f(a) if isinstance(a, Series) else f(Series.const(a, 1)).value

    return g


_MODULE = {
    "sin": _wrap(lambda a: sincos(a)[0]),
    "cos": _wrap(lambda a: sincos(a)[1]),
    "exp": _wrap(exp),
    "log": _wrap(log),
    "sqrt": lambda a: a ** 0.5,
    "pi": np.pi,
    "E": np.e,
}


def einsum(spec: str, *ops) -> Series:
    """Cauchy-product einsum of series (plain arrays count as constants)."""
    ser = [o for o in ops if isinstance(o, Series)]
    L = min(o.L for o in ser)
    arrs = [o.c[:L] if isinstance(o, Series) else np.asarray(o, dtype=float)[None] for o in ops]
    lens = [a.shape[0] for a in arrs]
    out = None
    # enumerate order tuples with total degree < L
    def rec(pos, used, idx):
        nonlocal out
        if pos == len(arrs):
            val = np.einsum(spec, *[a[i] for a, i in zip(arrs, idx)])
            if out is None:
                out = np.zeros((L,) + val.shape)
            out[used] += val
            return
        for i in range(min(lens[pos], L - used)):
            rec(pos + 1, used + i, idx + [i])

    rec(0, 0, [])
    return Series(out)


def inv(a: Series) -> Series:
    """Matrix inverse of a square-matrix series."""
    b = np.zeros_like(a.c)
    b[0] = np.linalg.inv(a.c[0])
    for k in range(1, a.L):
        b[k] = -b[0] @ sum(a.c[j] @ b[k - j] for j in range(1, k + 1))
    return Series(b)


def pinv_rank(a: Series, rank: int) -> Series:
    """Moore-Penrose inverse of a constant-rank matrix series.

    The value comes from a truncated SVD; higher coefficients solve the
    constant-rank derivative identity
    ``p' = -p a' p + p p^T a'^T (1 - a p) + (1 - p a) a'^T p^T p``
    by Picard iteration, one exact order per sweep.
    """
    m, n = a.shape
    if rank == 0:
        return Series(np.zeros((a.L, n, m)))
    u, s, vt = np.linalg.svd(a.c[0], full_matrices=False)
    p0 = (vt[:rank].T / s[:rank]) @ u[:, :rank].T
    da = a.diff()
    p = Series(p0[None])
    Im, In = np.eye(m), np.eye(n)
    for _ in range(a.L - 1):
        dp = -p @ da @ p + p @ p.T @ da.T @ (Im - a @ p) + (In - p @ a) @ da.T @ p.T @ p
        p = dp.integrate(p0)
    return p


def sym(a: Series) -> Series:
    return 0.5 * (a + a.T)


# ---------------------------------------------------------------------------
# symbolic arrays evaluated on series


class TaylorProgram:
    """Sparse symbolic array compiled for evaluation on series arguments."""

    def __init__(self, entries: dict, shape: tuple, n: int):
        self.shape = tuple(shape)
        self.index = list(entries)
        syms = coordinates(n)
        self.n = n
        if self.index:
            self._f = sp.lambdify([syms], [entries[i] for i in self.index], modules=[_MODULE], cse=True)
        else:
            self._f = None

    def __call__(self, xs: list) -> Series:
        L = min(x.L for x in xs)
        out = np.zeros((L,) + self.shape)
        if self._f is None:
            return Series(out)
        for idx, v in zip(self.index, self._f(xs)):
            if isinstance(v, Series):
                out[(slice(None),) + idx] = v.c[:L]
            else:
                out[(0,) + idx] = float(v)
        return Series(out)


class FramePrograms:
    """Frame ``F[mu, i]`` and its first and second coordinate derivatives."""

    def __init__(self, model):
        n = model.n
        syms = coordinates(n)
        F = {}
        for i in range(n):
            for mu in range(n):
                e = model.frame[i][mu].expr
                if e != 0:
                    F[(mu, i)] = e
        DF = {}
        D2F = {}
        for (mu, i), e in F.items():
            for nu in range(n):
                d = sp.diff(e, syms[nu])
                if d != 0:
                    DF[(mu, i, nu)] = d
                    for rho in range(nu, n):
                        d2 = sp.diff(d, syms[rho])
                        if d2 != 0:
                            D2F[(mu, i, nu, rho)] = d2
                            D2F[(mu, i, rho, nu)] = d2
        self.n = n
        self.F = TaylorProgram(F, (n, n), n)
        self.DF = TaylorProgram(DF, (n, n, n), n)
        self.D2F = TaylorProgram(D2F, (n, n, n, n), n)


_PROGRAMS: dict = {}


def frame_programs(model) -> FramePrograms:
    hit = _PROGRAMS.get(id(model))
    if hit is None or hit[0] is not model:
        hit = (model, FramePrograms(model))
        _PROGRAMS[id(model)] = hit
    return hit[1]


def _components(X: Series) -> list:
    return [X[mu] for mu in range(X.shape[0])]


def structure_series(model, X: Series, with_derivative: bool = False):
    """Series of ``c[k, i, j]`` along ``x(t)``; optionally also ``dc[nu, k, i, j] = d_nu c``."""
    prog = frame_programs(model)
    xs = _components(X)
    F = prog.F(xs)
    DF = prog.DF(xs)  # DF[mu, i, nu] = d_nu F[mu, i]
    Finv = inv(F)
    br = einsum("ni,mjn->mij", F, DF) - einsum("nj,min->mij", F, DF)
    C = einsum("km,mij->kij", Finv, br)
    if not with_derivative:
        return C, F, None
    D2F = prog.D2F(xs)  # D2F[mu, i, nu, rho]
    # d_rho of the bracket and of the inverse frame
    dbr = (einsum("nir,mjn->rmij", DF, DF) + einsum("ni,mjnr->rmij", F, D2F)
           - einsum("njr,min->rmij", DF, DF) - einsum("nj,minr->rmij", F, D2F))
    dFinv = -einsum("ka,abr,bm->rkm", Finv, DF, Finv)
    dC = einsum("rkm,mij->rkij", dFinv, br) + einsum("km,rmij->rkij", Finv, dbr)
    return C, F, dC


# ---------------------------------------------------------------------------
# calculus along an extremal


class ExtremalSeries:
    """Taylor data of a normal extremal through ``p`` for one connection.

    ``L`` coefficients are computed for the base point, momenta, structure
    constants and Christoffels; ``L_curv`` for curvature and nabla T.
    """

    def __init__(self, conn, p, L: int, L_curv: int = 2):
        if conn.linear is None:
            raise ValueError(f"connection {conn.name!r} has no structure-constant form")
        self.conn = conn
        self.model = model = conn.model
        self.n = n = model.n
        self.mask = np.asarray(model.horizontal_mask, dtype=float)
        self.L = L
        self.p = p
        lin = conn.linear
        X = Series(np.asarray(p.x, dtype=float)[None])
        Hs = Series(np.asarray(p.H, dtype=float)[None])
        for _ in range(L - 1):
            C, F, _ = structure_series(model, X)
            gam = Series(lin(C.c, np))
            ghat = Series(np.swapaxes(gam.c, -1, -2) + C.c)
            s = Hs * self.mask
            dX = F @ s
            dH = einsum("i,l,lik->k", s, Hs, ghat)
            X, Hs = dX.integrate(p.x), dH.integrate(p.H)
        self.X, self.H = X, Hs
        C, F, dC = structure_series(model, X, with_derivative=True)
        self.C = C
        self.gamma = Series(lin(C.c, np))
        self.s = Hs * self.mask
        self.G = einsum("i,kij->kj", self.s, self.gamma)
        self.Tor = self.gamma - Series(np.swapaxes(self.gamma.c, -1, -2)) - C
        # frame derivatives X_m(.) of the structure constants, then R and nabla T
        Lc = min(L_curv, L)
        F, dC = F.truncate(Lc), dC.truncate(Lc)
        XC = einsum("rm,rkij->mkij", F, dC)
        Xg = Series(lin(XC.c, np))  # Xg[m, l, j, k] = X_m(gamma[l, j, k])
        g, Cc = self.gamma.truncate(Lc), C.truncate(Lc)
        R = Series(np.einsum("...iljk->...lkij", Xg.c) - np.einsum("...jlik->...lkij", Xg.c))
        R = R + einsum("mjk,lim->lkij", g, g) - einsum("mik,ljm->lkij", g, g) - einsum("mij,lmk->lkij", Cc, g)
        self.R = R
        XT = Xg - Series(np.swapaxes(Xg.c, -1, -2)) - XC
        Tc = self.Tor.truncate(Lc)
        nT = XT + einsum("lmq,qij->mlij", g, Tc) - einsum("qmi,lqj->mlij", g, Tc) - einsum("qmj,liq->mlij", g, Tc)
        self.nT = nT

    # sections ------------------------------------------------------------
    def d(self, f: Series, valence: str) -> Series:
        """Flow derivative of a section given by its series in the moving frame."""
        out = f.diff()
        G = self.G
        for pos, v in enumerate(valence):
            src = "abcdefgh"[: len(valence)]
            if v == "u":
                dst = src[:pos] + "z" + src[pos + 1:]
                out = out + einsum(f"z{src[pos]},{src}->{dst}", G, f)
            else:
                dst = src[:pos] + "z" + src[pos + 1:]
                out = out - einsum(f"{src[pos]}z,{src}->{dst}", G, f)
        return out

    @cached_property
    def p1(self) -> Series:
        return -einsum("i,kij->kj", self.s, self.Tor)

    @cached_property
    def a_form(self) -> Series:
        return 0.5 * einsum("l,lij->ij", self.H, self.Tor)

    @cached_property
    def a_sharp(self) -> Series:
        return Series(self.mask[:, None] * self.a_form.T.c)

    def twist(self, k_max: int) -> list:
        """``[P_0, ..., P_kmax]`` by ``P_k = dP_{k-1} + P_1 P_{k-1}``."""
        P = [Series.const(np.eye(self.n), self.L), self.p1]
        for _ in range(2, k_max + 1):
            P.append(self.d(P[-1], "ud") + self.p1 @ P[-1])
        return P[: k_max + 1]
