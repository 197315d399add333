"""Twist polynomials, the flag they generate, and Young diagrams of geodesics.

Sections of pulled-back tensor bundles are jax functions ``(x, H) -> array``
in frame components.  The flow derivative is the pullback covariant derivative
along the Hamiltonian vector field,

    d/dflow E = jvp(E, (x, H), (x', H')) + connection terms,

which is exact: every derivative lands on closed-form frame coefficients.
A transport-and-finite-difference version (:func:`flow_derivative`) is kept as
an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import minimize_scalar

from .connections import Connection
from .flow import H_GRID, integrate_extremal, richardson, stencil_derivative, stencil_states
from .model import CovectorPoint
from .series import ExtremalSeries

K_MAX = 4
RANK_TOL = 1e-7


class FlowCalculus:
    """Pullback-section calculus along the Hamiltonian flow for one connection."""

    def __init__(self, conn: Connection):
        self.conn = conn
        self.model = conn.model
        self.n = conn.model.n
        self.d1 = conn.model.d1
        self.mask = jnp.asarray(conn.model.horizontal_mask)
        self.gamma = conn.gamma_fn
        self.ghat = conn.adjoint().gamma_fn
        self.frame = conn.model.jax_frame
        self.T = conn.torsion_fn
        self.R = conn.curvature_fn
        self.nT = conn.nabla_torsion_fn
        self.nnT = conn.nabla2_torsion_fn

    def sharp(self, H):
        return self.mask * H

    def velocity(self, x, H):
        """Hamiltonian vector field in (x, H) coordinates."""
        s = self.sharp(H)
        return self.frame(x) @ s, jnp.einsum("i,l,lik->k", s, H, self.ghat(x))

    def gamma_dot(self, x, H):
        """``G[k, j] = sum_i (sharp p)^i gamma[k, i, j]``, the connection matrix along the flow."""
        return jnp.einsum("i,kij->kj", self.sharp(H), self.gamma(x))

    def d(self, f, valence: str):
        """Flow derivative of a section ``f(x, H)`` whose slots are 'u' (vector) or 'd' (covector)."""

        def df(x, H):
            val, dv = jax.jvp(f, (x, H), self.velocity(x, H))
            G = self.gamma_dot(x, H)
            for pos, v in enumerate(valence):
                if v == "u":
                    dv = dv + jnp.moveaxis(jnp.tensordot(G, val, axes=([1], [pos])), 0, pos)
                else:
                    dv = dv - jnp.moveaxis(jnp.tensordot(G, val, axes=([0], [pos])), 0, pos)
            return dv

        return df

    # canonical sections ---------------------------------------------------
    def euler(self, x, H):
        return H

    def p1(self, x, H):
        """``P_1 = -T(sharp p, .)`` as a matrix ``[k, j]``."""
        return -jnp.einsum("i,kij->kj", self.sharp(H), self.T(x))

    def a_form(self, x, H):
        """``A(v, w) = 1/2 p(T(v, w))`` as a matrix ``[i, j]``."""
        return 0.5 * jnp.einsum("l,lij->ij", H, self.T(x))

    def a_sharp(self, x, H):
        """Endomorphism ``v -> sharp A(v, .)``."""
        return self.mask[:, None] * self.a_form(x, H).T

    def twist_fns(self, k_max: int = 3) -> list:
        """``[P_0, ..., P_kmax]`` as sections; ``P_k = d P_{k-1} + P_1 P_{k-1}``."""
        n = self.n
        fns = [lambda x, H: jnp.eye(n), self.p1]
        for _ in range(2, k_max + 1):
            prev = fns[-1]
            dprev = self.d(prev, "ud")
            fns.append(lambda x, H, prev=prev, dprev=dprev: dprev(x, H) + self.p1(x, H) @ prev(x, H))
        return fns[: k_max + 1]

    @cached_property
    def _twist_jit(self):
        cache = {}

        def get(k):
            if k not in cache:
                fns = self.twist_fns(k)
                cache[k] = jax.jit(lambda x, H: jnp.stack([f(x, H) for f in fns]))
            return cache[k]

        return get

    def twist_values(self, p: CovectorPoint, k_max: int = 3) -> np.ndarray:
        self.model.check_domain(p.x)
        f = self._twist_jit(k_max)
        return np.asarray(f(jnp.asarray(p.x), jnp.asarray(p.H)))


_CALC: dict = {}


def calculus(conn: Connection) -> FlowCalculus:
    hit = _CALC.get(id(conn))
    if hit is None or hit.conn is not conn:
        hit = FlowCalculus(conn)
        _CALC[id(conn)] = hit
    return hit


# ---------------------------------------------------------------------------
# closed forms for the Euler one-form (regression checks of the flow derivative)


def euler_derivatives(conn: Connection, p: CovectorPoint) -> tuple:
    """First two flow derivatives of the Euler one-form from T and nabla T."""
    T = conn._eval("T", p.x)
    nT = conn._eval("nT", p.x)
    s = p.H * conn.model.horizontal_mask

    def tstar(v, a):  # (T_v^* a)_j = a(T(v, X_j))
        return np.einsum("i,l,lij->j", v, a, T)

    mask = conn.model.horizontal_mask
    d1e = -tstar(s, p.H)
    nts = np.einsum("m,mlij->lij", s, nT)  # nabla_{sharp p} T
    d2e = -np.einsum("i,l,lij->j", s, p.H, nts) + tstar(mask * tstar(s, p.H), p.H) + tstar(s, tstar(s, p.H))
    return d1e, d2e


# ---------------------------------------------------------------------------
# finite-difference flow derivative along a transported frame


def flow_derivative(conn: Connection, p: CovectorPoint, section_evaluator, order: int = 1,
                    valence: str = "ud", h_grid=H_GRID) -> np.ndarray:
    """``order``-th flow derivative of a section by differencing in a parallel frame.

    ``section_evaluator(q)`` returns frame components at a covector ``q``; the
    values along the extremal are rewritten in the nabla-parallel frame started
    at ``p`` and differentiated in time at 0.
    """
    if not 1 <= order <= 3:
        raise ValueError("order must be in 1..3")
    n = conn.model.n
    st = stencil_states(conn, p, h_grid, (conn,))
    ests = []
    for h in h_grid:
        vals = []
        for j in range(-2, 3):
            z = st[(h, j)]
            q = CovectorPoint(z[:n], z[n: 2 * n])
            M = z[2 * n:].reshape(n, n)
            Minv = np.linalg.inv(M)
            E = np.asarray(section_evaluator(q), dtype=float)
            for pos, v in enumerate(valence):
                A = Minv if v == "u" else M.T
                E = np.moveaxis(np.tensordot(A, E, axes=([1], [pos])), 0, pos)
            vals.append(E)
        ests.append(stencil_derivative(np.array(vals), h, order))
    return richardson(ests)


# ---------------------------------------------------------------------------
# flag, ranks and diagrams


@dataclass(frozen=True)
class YoungDiagramData:
    """Young diagram from column heights ``d_1 >= d_2 >= ...``.

    Rows are indexed from the longest; ``rows[a]`` is the length of row a.
    The reduced diagram keeps one row per distinct length, with multiplicity.
    """

    columns: tuple
    dim: int

    @property
    def step(self) -> int:
        return len(self.columns)

    @property
    def rows(self) -> tuple:
        if not self.columns:
            return ()
        return tuple(sum(1 for d in self.columns if d > a) for a in range(self.columns[0]))

    @property
    def reduced_rows(self) -> tuple:
        """``((length, multiplicity), ...)`` with strictly decreasing length."""
        out = []
        for r in self.rows:
            if out and out[-1][0] == r:
                out[-1] = (r, out[-1][1] + 1)
            else:
                out.append((r, 1))
        return tuple(out)

    @property
    def reduced(self) -> tuple:
        """Column heights of the reduced diagram."""
        lengths = [r for r, _ in self.reduced_rows]
        if not lengths:
            return ()
        return tuple(sum(1 for L in lengths if L > j) for j in range(lengths[0]))

    @property
    def ample(self) -> bool:
        return sum(self.columns) == self.dim

    def block(self, a: int, b: int) -> tuple:
        """Reduced block (0-based) of the cell in row a, column b."""
        lengths = [r for r, _ in self.reduced_rows]
        return lengths.index(self.rows[a]), b

    def label(self) -> str:
        return "Y(" + ",".join(str(d) for d in self.columns) + ")"

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "reduced": list(self.reduced),
                "rows": list(self.rows), "ample": self.ample, "step": self.step}


@dataclass
class FlagData:
    bases: list
    ranks: tuple
    singular_values: list
    thresholds: list
    uncertain: bool
    irregular: bool
    margin: float


def flag_and_ranks(P: np.ndarray, d1: int, scale: float = 1.0, tol: float = RANK_TOL,
                   band: float = 10.0) -> FlagData:
    """Flag ``E^1 = E``, ``E^{i+1} = E^i + P_i E`` by incremental SVD.

    ``P[i]`` is ``P_i`` and ``scale`` is ``|sharp p|``; each ``P_i`` is divided
    by ``scale^i`` so decisions do not change when the covector is rescaled.
    A decision is uncertain when a singular value lies within a factor
    ``band`` of the threshold; ``margin`` is the smallest log10 distance of
    any singular value from its threshold.
    """
    n = P.shape[1]
    Q = np.eye(n)[:, :d1]
    bases, ranks = [Q], [d1]
    svs, thrs = [], []
    uncertain = irregular = False
    margin = np.inf
    if scale == 0.0:
        return FlagData(bases, tuple(ranks), svs, thrs, False, False, margin)
    for i in range(1, len(P)):
        if Q.shape[1] == n:
            break
        Pi = P[i][:, :d1] / scale ** i
        M = Pi - Q @ (Q.T @ Pi)
        U, s, _ = np.linalg.svd(M)
        thr = tol * np.linalg.svd(np.hstack([Q, Pi]), compute_uv=False)[0]
        svs.append(s)
        thrs.append(thr)
        rank = int(np.sum(s > thr))
        if np.any((s > thr / band) & (s < thr * band)):
            uncertain = True
        pos = s[s > 0]
        if pos.size:
            margin = min(margin, float(np.min(np.abs(np.log10(pos / thr)))))
        if rank == 0:
            break
        if rank > ranks[-1]:
            # the diagram convention sets d_i = 0 here; report the covector as irregular
            irregular = True
            break
        ranks.append(rank)
        Q = np.hstack([Q, U[:, :rank]])
        bases.append(Q)
    return FlagData(bases, tuple(ranks), svs, thrs, uncertain, irregular, margin)


@dataclass
class TwistData:
    """Twist matrices at a covector with the flag and diagram they determine."""

    p: CovectorPoint
    P: np.ndarray
    flag: FlagData = field(repr=False)
    diagram: YoungDiagramData

    @property
    def ranks(self) -> tuple:
        return self.flag.ranks

    @property
    def uncertain(self) -> bool:
        return self.flag.uncertain

    @property
    def irregular(self) -> bool:
        return self.flag.irregular


def twist_polynomials(conn: Connection, p: CovectorPoint, k_max: int = 3, tol: float = RANK_TOL,
                      method: str = "series") -> TwistData:
    """``P_0..P_kmax`` at ``p`` by the exact recursion, with flag and diagram.

    ``method="series"`` runs the recursion on Taylor coefficients along the
    extremal; ``"jvp"`` nests forward-mode derivatives of jax sections.
    """
    if not 0 <= k_max <= K_MAX:
        raise ValueError(f"k_max must be in 0..{K_MAX}")
    if method == "series" and conn.linear is not None:
        es = ExtremalSeries(conn, p, max(k_max, 1) + 1, L_curv=1)
        P = np.stack([Pk.value for Pk in es.twist(k_max)])
    elif method in ("series", "jvp"):
        P = calculus(conn).twist_values(p, k_max)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _twist_data(conn, p, P, tol)


def _twist_data(conn, p, P, tol):
    model = conn.model
    scale = float(np.linalg.norm(p.H[: model.d1]))
    flag = flag_and_ranks(P, model.d1, scale, tol)
    return TwistData(p, P, flag, YoungDiagramData(flag.ranks, model.n))


@dataclass
class Classification:
    diagram: YoungDiagramData
    ample: bool
    equiregular: bool
    in_sigma: bool | None
    uncertain: bool
    irregular: bool
    times: np.ndarray
    diagrams: list

    def to_dict(self) -> dict:
        return {"diagram": self.diagram.label(), "reduced": list(self.diagram.reduced),
                "ample": self.ample, "equiregular": self.equiregular, "in_sigma": self.in_sigma,
                "uncertain": self.uncertain, "irregular": self.irregular}


def _deciding_margin(conn, q, k_max, tol, ranks):
    """Smallest log10 gap between a kept singular value and its threshold at q."""
    td = twist_polynomials(conn, q, k_max, tol)
    if td.ranks != ranks:
        return -1.0
    m = np.inf
    for s, thr, r in zip(td.flag.singular_values, td.flag.thresholds, ranks[1:]):
        m = min(m, float(np.log10(s[r - 1] / thr)))
    return m


def classify(model, conn: Connection, p: CovectorPoint, window: float = 0.0, samples: int = 9,
             maximal_diagram=None, k_max: int = 3, tol: float = RANK_TOL) -> Classification:
    """Diagram at ``p`` and along ``[0, window]`` of its extremal.

    Equiregularity requires equal rank sequences at all samples; the
    minimum of the smallest kept singular value over the window is then
    refined with a bounded scalar search to catch isolated drops.
    """
    td = twist_polynomials(conn, p, k_max, tol)
    diagrams = [td.diagram]
    times = np.array([0.0])
    uncertain, irregular = td.uncertain, td.irregular
    equiregular = True
    if window > 0 and np.any(p.H[: model.d1] != 0):
        ext = integrate_extremal(model, conn, p, window)
        t_hi = ext.t_end
        times = np.linspace(0.0, t_hi, samples)
        margins = []
        for t in times[1:]:
            q = ext.covector(t)
            tq = twist_polynomials(conn, q, k_max, tol)
            diagrams.append(tq.diagram)
            uncertain |= tq.uncertain
            irregular |= tq.irregular
        equiregular = len({d.columns for d in diagrams}) == 1 and not ext.exited
        if equiregular and len(td.ranks) > 1:
            for t in times:
                margins.append(_deciding_margin(conn, ext.covector(t), k_max, tol, td.ranks))
            j = int(np.argmin(margins))
            lo, hi = times[max(j - 1, 0)], times[min(j + 1, len(times) - 1)]
            res = minimize_scalar(lambda t: _deciding_margin(conn, ext.covector(t), k_max, tol, td.ranks),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-6 * max(t_hi, 1)})
            if res.fun < 0:
                equiregular = False
    in_sigma = None if maximal_diagram is None else tuple(td.diagram.columns) == tuple(maximal_diagram)
    return Classification(td.diagram, td.diagram.ample, equiregular, in_sigma, uncertain, irregular,
                          times, diagrams)
