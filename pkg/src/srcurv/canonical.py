"""Canonical horizontal frame, curvature map and Ricci invariants along geodesics.

All sections are Taylor series along the extremal through the covector
(:class:`~srcurv.series.ExtremalSeries`), so every flow derivative of an
intermediate object is exact.  Projectors and the maps B, C come from
pseudo-inverses of fixed rank, whose series follow from the constant-rank
derivative identity.

Matrix conventions: endomorphisms act on frame components (``M[k, j]`` is the
``X_k`` component of ``M X_j``), bilinear forms are ``S[i, j] = S(X_i, X_j)``,
and because the frame is orthonormal the g-adjoint on E is the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .connections import Connection, curvature, nabla_torsion, torsion
from .model import CovectorPoint
from .series import ExtremalSeries, Series, einsum, pinv_rank, sym
from .twist import RANK_TOL, YoungDiagramData, twist_polynomials

FRAME_RTOL = 1e-11
FRAME_ATOL = 1e-12
BC_TOL = 1e-6
KERNEL_TOL = 1e-5


class UnsupportedDiagramError(ValueError):
    pass


class DegenerateCovectorError(ValueError):
    pass


class InconsistencyError(RuntimeError):
    """A defining equation that should hold exactly has a large residual."""


class CanonicalPipeline:
    """Series sections for one connection and one Young diagram.

    Reduced rows are indexed from the longest: row ``a`` has length
    ``lengths[a]`` and multiplicity ``mult[a]``; ``boxes[a]`` projects onto
    ``Box^{a,1}`` and ``boxes[-1]`` is the final box.
    """

    def __init__(self, conn: Connection, diagram: YoungDiagramData):
        if not diagram.ample:
            raise DegenerateCovectorError("canonical frame needs an ample diagram")
        self.conn = conn
        self.model = conn.model
        self.n = conn.model.n
        self.mask = np.asarray(conn.model.horizontal_mask, dtype=float)
        self.diagram = diagram
        self.columns = tuple(diagram.columns)
        rr = diagram.reduced_rows
        self.lengths = tuple(r for r, _ in rr)
        self.mult = tuple(m for _, m in rr)
        self.step = len(self.columns)
        self.shape = tuple(diagram.reduced)
        self.full_s = self.shape in ((1,), (2, 1))

    def series(self, p: CovectorPoint, L: int | None = None, L_curv: int = 2) -> ExtremalSeries:
        return ExtremalSeries(self.conn, p, L or self.step + 3, L_curv=L_curv)

    # core: flag, boxes, B, C, Q, S on E, wp_1 -------------------------------
    def core(self, es: ExtremalSeries) -> dict:
        n = self.n
        eye = np.eye(n)
        prE = np.diag(self.mask)
        P = es.twist(self.step)
        Pi = [np.zeros((n, n)), prE]
        for i in range(1, self.step - 1):
            M = (eye - Pi[i]) @ P[i] @ prE
            Pi.append(Pi[i] + M @ pinv_rank(M, self.columns[i]))
        m = len(self.lengths)
        prs = [None] * m
        acc = np.zeros((n, n))
        for a in reversed(range(m)):
            om = prE - acc
            if a == 0:
                pa = om
            else:
                k = self.lengths[a]
                K = (eye - Pi[k]) @ P[k] @ om
                pa = om - pinv_rank(K, sum(self.mult[:a])) @ K
            prs[a] = pa
            acc = acc + pa
        B = np.zeros((n, n))
        C = np.zeros((n, n))
        res_b = res_c = 0.0
        for a in range(m):
            k = self.lengths[a]
            comp = eye - Pi[k - 1]
            L = comp @ P[k - 1] @ sum(prs[: a + 1])
            Ba = -pinv_rank(L, sum(self.mult[: a + 1])) @ comp @ P[k] @ prs[a]
            res_b += float(np.sum((comp @ (P[k] @ prs[a] + P[k - 1] @ Ba)).value ** 2))
            B = B + Ba
            if a > 0:
                comp = eye - Pi[k]
                L = comp @ P[k] @ sum(prs[:a])
                Ca = -pinv_rank(L, sum(self.mult[:a])) @ comp @ P[k + 1] @ prs[a]
                res_c += float(np.sum((comp @ (P[k + 1] @ prs[a] + P[k] @ Ca)).value ** 2))
                C = C + Ca
        B0 = sum(pa @ B @ pa for pa in prs)
        Bp = B - B0
        Ash = es.a_sharp
        CB = C - Bp
        Q = sum(0.5 / self.lengths[a] * prs[a] @ (B0 - B0.T - 2 * Ash) @ prs[a] for a in range(m))
        Q = Q + CB - CB.T
        S = sum(pa @ sym(B0) @ pa for pa in prs)
        for a in range(m):
            for i in range(a):
                Z = prs[i] @ (Bp - self.lengths[a] * CB - Ash) @ prs[a]
                S = S + Z + Z.T
        wp1 = (P[1] + Q + Ash + S) @ prE
        return {"P": P, "flag": Pi, "boxes": prs, "B": B, "B0": B0, "Bp": Bp, "C": C, "Q": Q,
                "S_E": S, "A_sharp": Ash, "wp1": wp1,
                "residual_B": np.sqrt(res_b), "residual_C": np.sqrt(res_c)}

    # S completion ------------------------------------------------------------
    def s_partial(self, es: ExtremalSeries, c: dict):
        """S with every entry fixed except the block on the span of the second column.

        Returns ``(S, extras)``; for the shape Y(1) this is already all of S.
        """
        if self.shape == (1,):
            return c["S_E"], {}
        if self.shape != (2, 1):
            raise UnsupportedDiagramError(
                f"S completion supports reduced diagrams Y(1) and Y(2,1), not Y{self.shape}")
        eye = np.eye(self.n)
        prE = np.diag(self.mask)
        prA = eye - prE
        P1, wp1, Q, Ash = c["P"][1], c["wp1"], c["Q"], c["A_sharp"]
        pr1 = c["boxes"][0]
        N = prA @ P1 @ pr1
        Np = pinv_rank(N, self.mult[0])
        U = Np @ prA
        W = wp1 @ U  # columns: wp_1 of the Box^{1,1} vector whose image has that A-component
        second = es.d(wp1, "ud") @ U + wp1 @ Q @ U + (P1 + Ash) @ W
        SW = -prE @ second
        S_ad = c["S_E"] + prE @ SW @ prA + (prE @ SW @ prA).T
        Phi_inv = eye - prE @ W
        S = Phi_inv.T @ S_ad @ Phi_inv
        return S, {"Np": Np, "W": W, "wp2_residual": prA @ second}

    def curvature_map(self, es: ExtremalSeries, S: Series) -> Series:
        """The symmetric curvature map of the splitting defined by ``S``."""
        M1 = einsum("l,i,lkij->jk", es.H, es.s, es.R)
        M2 = einsum("l,i,mlij->mj", es.H, es.s, es.nT)
        SA = np.diag(self.mask) @ S + es.a_sharp
        return sym(M1) + sym(M2) + SA.T @ SA - es.d(S, "dd") + es.p1.T @ S + S @ es.p1

    def s_full(self, es: ExtremalSeries, c: dict):
        S0, ex = self.s_partial(es, c)
        if self.shape == (1,):
            return S0, ex
        R0 = self.curvature_map(es, S0)
        pr1 = c["boxes"][0]
        K = R0 @ c["wp1"]
        D = -0.5 * ex["Np"].T @ pr1 @ (K + K.T) @ pr1 @ ex["Np"]
        return S0 + D, ex

    # evaluation --------------------------------------------------------------
    def evaluate(self, p: CovectorPoint, full: bool = True, check: bool = True) -> dict:
        """Pointwise data at ``p`` as numpy arrays.

        With ``full`` and a supported shape the completed S, the curvature
        map ``RS`` and the wp_2 residual on ``Box^{1,1}`` are included.
        """
        es = self.series(p, L=(self.step + 3) if full else self.step + 1, L_curv=2 if full else 1)
        c = self.core(es)
        scale = max(float(np.linalg.norm(p.H[: self.model.d1])), 1e-300)
        if check:
            worst = max(c["residual_B"], c["residual_C"]) / scale ** (self.step + 1)
            if worst > BC_TOL:
                raise InconsistencyError(f"B/C residual {worst:.3g} above {BC_TOL:g}; rank misclassification?")
        out = {}
        for k, v in c.items():
            if isinstance(v, list):
                out[k] = np.stack([x.value if isinstance(x, Series) else np.asarray(x) for x in v])
            elif isinstance(v, Series):
                out[k] = v.value
            else:
                out[k] = np.asarray(v)
        out["G"] = es.G.value
        if full and self.full_s:
            S, ex = self.s_full(es, c)
            out["S"] = S.value
            out["RS"] = self.curvature_map(es, S).value
            r2 = ex.get("wp2_residual")
            out["wp2_residual"] = np.zeros((self.n, self.n)) if r2 is None else (r2 @ c["boxes"][0]).value
        return out


_PIPES: dict = {}


def pipeline(conn: Connection, diagram: YoungDiagramData) -> CanonicalPipeline:
    key = (id(conn), diagram.columns)
    hit = _PIPES.get(key)
    if hit is None or hit.conn is not conn:
        hit = CanonicalPipeline(conn, diagram)
        _PIPES[key] = hit
    return hit


# ---------------------------------------------------------------------------
# box-adapted bases and pointwise data


def _gram_schmidt(vectors, tol: float = 1e-8) -> np.ndarray:
    out = []
    for v in vectors:
        w = v - sum((u @ v) * u for u in out) if out else v.copy()
        nv = np.linalg.norm(w)
        if nv > tol:
            out.append(w / nv)
    return np.array(out).T if out else np.zeros((len(vectors[0]), 0))


@dataclass
class BoxDecomposition:
    """Orthonormal bases (columns, frame components) and projectors of ``Box^{a,1}``."""

    bases: list
    projections: np.ndarray
    lengths: tuple
    mult: tuple

    @property
    def final(self) -> np.ndarray:
        return self.bases[-1]

    def to_dict(self) -> dict:
        return {"ranks": [b.shape[1] for b in self.bases], "row_lengths": list(self.lengths)}


def box_bases(boxes: np.ndarray, d1: int, mult=None, lengths=()) -> BoxDecomposition:
    """Gram-Schmidt of the projected frame vectors ``X_0, X_1, ...`` inside each box."""
    n = boxes.shape[1]
    bases = []
    for a, pa in enumerate(boxes):
        vecs = [pa[:, i] for i in range(d1)]
        Bm = _gram_schmidt(vecs)
        if mult is not None and Bm.shape[1] != mult[a]:
            raise InconsistencyError(f"box {a} has rank {Bm.shape[1]}, expected {mult[a]}")
        bases.append(Bm)
    return BoxDecomposition(bases, np.asarray(boxes), tuple(lengths), tuple(mult or ()))


def box_decomposition(conn: Connection, p: CovectorPoint, tol: float = RANK_TOL) -> BoxDecomposition:
    td = twist_polynomials(conn, p, 3, tol)
    pipe = pipeline(conn, td.diagram)
    c = pipe.evaluate(p, full=False)
    return box_bases(c["boxes"], conn.model.d1, pipe.mult, pipe.lengths)


@dataclass
class CanonicalData:
    """Pointwise canonical data at a covector.

    ``basis`` holds the box-adapted canonical basis at time 0 as columns in
    frame components, ordered row by row: ``X_{a,1}, X_{a,2}, ...`` for each
    cell-row of the diagram. ``cells`` lists the reduced ``(a, b)`` block of
    each column (0-based).
    """

    p: CovectorPoint
    diagram: YoungDiagramData
    boxes: BoxDecomposition
    B0: np.ndarray
    Bp: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    S_E: np.ndarray
    A_sharp: np.ndarray
    wp1: np.ndarray
    residual_B: float
    residual_C: float
    S: np.ndarray | None = None
    RS: np.ndarray | None = None
    wp2_residual: np.ndarray | None = None
    basis: np.ndarray | None = None
    cells: list = field(default_factory=list)
    scale: float = 1.0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def has_curvature(self) -> bool:
        return self.RS is not None

    def in_basis(self, M: np.ndarray) -> np.ndarray:
        """Entries ``M(v_i, v_j)`` of a bilinear form on the canonical basis vectors."""
        return self.basis.T @ M @ self.basis


def _canonical_basis(bx: BoxDecomposition, wp1: np.ndarray, lengths) -> tuple:
    cols, cells = [], []
    for a, Ba in enumerate(bx.bases):
        for j in range(Ba.shape[1]):
            v = Ba[:, j]
            for b in range(lengths[a]):
                cols.append(v)
                cells.append((a, b))
                v = wp1 @ v
    return np.array(cols).T, cells


def canonical_data(conn: Connection, p: CovectorPoint, diagram: YoungDiagramData | None = None,
                   full: bool = True, tol: float = RANK_TOL) -> CanonicalData:
    """Run the pipeline at ``p``; the diagram is classified when not given."""
    if not np.any(p.H[: conn.model.d1]):
        raise DegenerateCovectorError("sharp p = 0: no curvature data")
    if diagram is None:
        td = twist_polynomials(conn, p, 3, tol)
        if td.irregular:
            raise DegenerateCovectorError("irregular flag at this covector")
        diagram = td.diagram
    pipe = pipeline(conn, diagram)
    r = pipe.evaluate(p, full=full)
    bx = box_bases(r["boxes"], conn.model.d1, pipe.mult, pipe.lengths)
    data = CanonicalData(p, diagram, bx, r["B0"], r["Bp"], r["C"], r["Q"], r["S_E"], r["A_sharp"], r["wp1"],
                         float(r["residual_B"]), float(r["residual_C"]), r.get("S"), r.get("RS"),
                         r.get("wp2_residual"), raw=r,
                         scale=float(np.linalg.norm(p.H[: conn.model.d1])))
    if pipe.lengths[0] <= 2:
        data.basis, data.cells = _canonical_basis(bx, r["wp1"], pipe.lengths)
    return data


def kernel_residuals(data: CanonicalData) -> dict:
    """``wp_{n_a}`` on ``Box^{a,1}``: the rows of length one are killed by wp_1, the first row of Y(2,1) by wp_2."""
    out = {}
    scale = data.scale
    lengths = tuple(r for r, _ in data.diagram.reduced_rows)
    for a, Ba in enumerate(data.boxes.bases):
        if lengths[a] == 1:
            out[f"wp1 on Box({a + 1},1)"] = float(np.linalg.norm(data.wp1 @ Ba)) / max(scale, 1e-300)
        elif lengths[a] == 2 and data.wp2_residual is not None:
            out[f"wp2 on Box({a + 1},1)"] = float(np.linalg.norm(data.wp2_residual @ Ba)) / max(scale, 1e-300) ** 2
    return out


# ---------------------------------------------------------------------------
# Ricci invariants


def ricci(data: CanonicalData) -> dict:
    """Box traces of the curvature map, keyed ``"Ric(a,b)"`` with 1-based reduced indices."""
    if data.RS is None:
        return {}
    RS = data.RS
    out = {}
    lengths = tuple(r for r, _ in data.diagram.reduced_rows)
    for a, Ba in enumerate(data.boxes.bases):
        out[f"Ric({a + 1},1)"] = float(np.trace(Ba.T @ RS @ Ba))
        if lengths[a] >= 2:
            V2 = data.wp1 @ Ba
            out[f"Ric({a + 1},2)"] = float(np.trace(V2.T @ RS @ V2))
    return out


def ricci_at(conn: Connection, p: CovectorPoint, diagram: YoungDiagramData | None = None) -> dict:
    return ricci(canonical_data(conn, p, diagram))


@dataclass
class FinalBoxResult:
    """The final-box Ricci functional at a covector and the data behind it."""

    value: float
    rank: int
    residual: float
    basis: np.ndarray
    C: np.ndarray
    terms: dict

    @property
    def empty(self) -> bool:
        return self.rank == 0

    def normalized(self) -> float | None:
        """``value / (rank - 1)`` when the final box has rank above one."""
        return self.value / (self.rank - 1) if self.rank > 1 else None


def _null_space(M: np.ndarray, tol: float) -> tuple:
    u, s, vt = np.linalg.svd(M)
    thr = tol * max(s[0] if s.size else 0.0, 1e-300)
    r = int(np.sum(s > thr))
    return vt[r:].T, vt[:r].T


def final_box_ricci(conn: Connection, p: CovectorPoint, tol: float = RANK_TOL, sign: int = 1) -> FinalBoxResult:
    """Final-box Ricci from torsion, its covariant derivative and curvature at the base point.

    The final box is ``ker T(sharp p, .)`` on E.  The map C from the final
    box to its complement in E solves

        T(sharp p, C u) = sign * ( -(nabla_{sharp p} T)(sharp p, u) + sum_k p(T(sharp p, e_k)) T(e_k, u) )

    by least squares over an orthonormal basis e_k of E.  ``sign = 1`` is the
    sign that reproduces the pipeline's box trace; ``-1`` is kept for
    comparison.
    """
    model = conn.model
    d1, n = model.d1, model.n
    x, H = np.asarray(p.x, dtype=float), np.asarray(p.H, dtype=float)
    s = np.zeros(n)
    s[:d1] = H[:d1]
    T = torsion(conn, x)
    R = curvature(conn, x)
    nT = nabla_torsion(conn, x)
    Ts = np.einsum("kij,i->kj", T, s)[:, :d1]
    box, comp = _null_space(Ts, tol)
    box = np.vstack([box, np.zeros((n - d1, box.shape[1]))])
    comp = np.vstack([comp, np.zeros((n - d1, comp.shape[1]))])
    rank = box.shape[1]
    if rank == 0:
        return FinalBoxResult(0.0, 0, 0.0, box, np.zeros((n, 0)), {})
    pT = np.einsum("l,lij->ij", H, T)  # p(T(X_i, X_j))
    nTs = np.einsum("m,mlij,i->lj", s, nT, s)  # (nabla_s T)(s, X_j)
    trace = np.einsum("k,lkj->lj", (s @ pT)[:d1], T[:, :d1, :])  # sum_k p(T(s, X_k)) T(X_k, .)
    rhs = sign * (-nTs + trace) @ box
    Tc = np.einsum("kij,i->kj", T, s) @ comp
    coef, *_ = np.linalg.lstsq(Tc, rhs, rcond=None)
    res = float(np.linalg.norm(Tc @ coef - rhs)) / max(float(np.linalg.norm(rhs)), float(s @ s) ** 1.5, 1e-300)
    Cm = comp @ coef
    t_R = float(np.einsum("lkij,ke,i,je,l->", R, box, s, box, s))
    t_nT = float(np.einsum("l,mlij,me,i,je->", H, nT, box, s, box))
    pTb = box.T @ pT @ box
    t_A = 0.25 * float(np.sum(pTb ** 2))
    t_C = -float(np.sum(Cm ** 2))
    t_CT = -float(np.einsum("ij,ie,je->", pT, box, Cm))
    terms = {"curvature": t_R, "nabla_torsion": t_nT, "torsion_square": t_A, "C_square": t_C, "C_torsion": t_CT}
    return FinalBoxResult(t_R + t_nT + t_A + t_C + t_CT, rank, res, box, Cm, terms)


# ---------------------------------------------------------------------------
# canonical frame along the extremal


@dataclass
class FrameSamples:
    """Canonical horizontal frame ``X_{a,1}(t)`` (columns ``M``) with the extremal state."""

    t: np.ndarray
    x: np.ndarray
    H: np.ndarray
    M: np.ndarray
    gram_drift: float
    cells: list
    second: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "gram_drift": self.gram_drift}


def _frame_rhs(pipe: CanonicalPipeline, n: int, k: int):
    def rhs(t, z):
        x, H = z[:n], z[n: 2 * n]
        M = z[2 * n:].reshape(n, k)
        es = pipe.series(CovectorPoint(x, H), L=pipe.step + 1, L_curv=1)
        c = pipe.core(es)
        G, Q = es.G.value, c["Q"].value
        dx = es.X.c[1]
        dH = es.H.c[1]
        return np.concatenate([dx, dH, ((Q - G) @ M).ravel()])

    return rhs


def canonical_frame(conn: Connection, p: CovectorPoint, t_max: float, samples: int = 11,
                    diagram: YoungDiagramData | None = None, with_second: bool = False) -> FrameSamples:
    """Integrate ``D_t X_{a,1} = Q X_{a,1}`` from the box-adapted basis at ``p``.

    In frame components ``D_t X = x' + G x`` so the ODE is ``M' = (Q - G) M``,
    solved jointly with the extremal.  ``X_{a,2} = wp_1 X_{a,1}`` is added
    when ``with_second`` is set.
    """
    data = canonical_data(conn, p, diagram, full=False)
    pipe = pipeline(conn, data.diagram)
    n = conn.model.n
    M0 = np.hstack(data.boxes.bases)
    cells = [(a, 0) for a, Ba in enumerate(data.boxes.bases) for _ in range(Ba.shape[1])]
    k = M0.shape[1]
    z0 = np.concatenate([p.x, p.H, M0.ravel()])
    ts = np.linspace(0.0, t_max, samples)
    sol = solve_ivp(_frame_rhs(pipe, n, k), (0.0, t_max), z0, method="DOP853", t_eval=ts,
                    rtol=FRAME_RTOL, atol=FRAME_ATOL)
    if not sol.success:
        raise RuntimeError(f"canonical frame integration failed: {sol.message}")
    X, H = sol.y[:n].T, sol.y[n: 2 * n].T
    M = sol.y[2 * n:].T.reshape(-1, n, k)
    drift = max(float(np.max(np.abs(Mi.T @ Mi - np.eye(k)))) for Mi in M)
    second = None
    if with_second:
        second = np.stack([pipe.evaluate(CovectorPoint(xi, Hi), full=False)["wp1"] @ Mi
                           for xi, Hi, Mi in zip(X, H, M)])
    return FrameSamples(sol.t, X, H, M, drift, cells, second)


def jacobi_conjugate_time(conn: Connection, p: CovectorPoint, t_max: float,
                          diagram: YoungDiagramData | None = None) -> float | None:
    """First conjugate time of the Jacobi system in the canonical frame.

    The LQ model of the diagram with the time-dependent potential
    ``q(t) = V(t)^T R^S V(t)`` (``V`` the canonical basis) is integrated
    jointly with the extremal and the frame; supported for reduced diagrams
    with rows of length at most two.
    """
    from .lq import young_matrices

    data = canonical_data(conn, p, diagram)
    if not data.has_curvature or data.basis is None:
        raise UnsupportedDiagramError(f"Jacobi system needs the full curvature map, not Y{data.diagram.reduced}")
    pipe = pipeline(conn, data.diagram)
    n = conn.model.n
    rows = []
    for a, Ba in enumerate(data.boxes.bases):
        rows += [pipe.lengths[a]] * Ba.shape[1]
    A, B = young_matrices(rows)
    N = A.shape[0]
    M0 = np.hstack(data.boxes.bases)
    k = M0.shape[1]
    power = sum((2 * b + 1) for r in rows for b in range(r))

    def unpack(z):
        return z[:n], z[n: 2 * n], z[2 * n: 2 * n + n * k].reshape(n, k), z[2 * n + n * k:].reshape(2 * N, N)

    def rhs(t, z):
        x, H, M, Z = unpack(z)
        es = pipe.series(CovectorPoint(x, H))
        c = pipe.core(es)
        S, _ = pipe.s_full(es, c)
        RS = pipe.curvature_map(es, S).value
        wp1 = c["wp1"].value
        cols = []
        j = 0
        for a, Ba in enumerate(data.boxes.bases):
            for _ in range(Ba.shape[1]):
                v = M[:, j]
                for _b in range(pipe.lengths[a]):
                    cols.append(v)
                    v = wp1 @ v
                j += 1
        V = np.array(cols).T
        q = V.T @ RS @ V
        Hm = np.block([[-A.T, -q], [B @ B.T, A]])
        dM = (c["Q"].value - es.G.value) @ M
        return np.concatenate([es.X.c[1], es.H.c[1], dM.ravel(), (Hm @ Z).ravel()])

    def event(t, z):
        if t <= 0.0:
            return 1.0
        return float(np.linalg.det(unpack(z)[3][N:])) / t ** power

    event.terminal = True
    event.direction = -1
    Z0 = np.vstack([np.eye(N), np.zeros((N, N))])
    z0 = np.concatenate([p.x, p.H, M0.ravel(), Z0.ravel()])
    sol = solve_ivp(rhs, (0.0, t_max), z0, method="DOP853", events=event, rtol=FRAME_RTOL, atol=FRAME_ATOL)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return None


# ---------------------------------------------------------------------------
# normalization conditions


@dataclass
class NormalizationReport:
    residuals: dict
    vacuous: list
    applicable: dict

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_dict(self) -> dict:
        return {"residuals": self.residuals, "vacuous": self.vacuous, "applicable": self.applicable}


def _cell_index(cells):
    return {c: [i for i, cc in enumerate(cells) if cc == c] for c in set(cells)}


def validate_normalization(data: CanonicalData, RS: np.ndarray | None = None) -> NormalizationReport:
    """Residuals of the canonical-frame normalization conditions (i)-(v) on the curvature map.

    Cells are reduced blocks (a, b) with 1-based labels in the report.  The
    conditions are evaluated entry by entry in the canonical basis; a
    condition with no entry for the diagram is listed as vacuous.  All
    residuals are scaled by ``|sharp p|^(2b + 2j)`` of the entries involved.
    """
    RS = data.RS if RS is None else RS
    if RS is None or data.basis is None:
        raise UnsupportedDiagramError("normalization check needs the full curvature map")
    V = data.basis
    Rm = V.T @ RS @ V
    lengths = tuple(r for r, _ in data.diagram.reduced_rows)
    scale = data.scale
    idx = _cell_index(data.cells)
    m = len(lengths)

    def ent(a, b, i, j):
        return Rm[np.ix_(idx[(a, b)], idx[(i, j)])]

    res = {k: 0.0 for k in ("i", "ii", "iii", "iv", "v")}
    count = {k: 0 for k in res}

    def add(key, val, order):
        res[key] = max(res[key], float(np.max(np.abs(val), initial=0.0)) / scale ** order)
        count[key] += int(np.size(val))

    for a in range(m):
        na = lengths[a]
        for i in range(m):
            ni = lengths[i]
            for b in range(na):
                for j in range(ni):
                    o = 2 * (b + 1) + 2 * (j + 1)
                    if a == i:
                        if b + 1 < na and j == b:
                            # (i): R(X_{a,b}, X_{i,b+1}) = -R(X_{a,b+1}, X_{i,b}) within the row
                            add("i", ent(a, b, a, b + 1) + ent(a, b + 1, a, b), o + 2)
                        if abs(j - b) > 1:
                            add("ii", ent(a, b, a, j), o)
                    elif a < i:
                        if j + 1 < ni and j not in (b, b + 1):
                            add("iii", ent(a, b, i, j), o)
                        if b + 1 < ni - 1 and j == ni - 1:
                            add("iv", ent(a, b, i, j), o)
                        if na - ni >= (b + 1) + (j + 1):
                            add("v", ent(a, b, i, j), o)
    vac = [k for k in res if count[k] == 0]
    return NormalizationReport({k: v for k, v in res.items() if count[k]}, vac, count)


def perturbation_control(conn: Connection, p: CovectorPoint, eps=(1e-4, 2e-4, 4e-4), seed: int = 0) -> dict:
    """Negative control: condition (i) residual for ``S + eps N`` with symmetric noise ``N``.

    Returns the residuals and their ratios to ``eps``; linear growth shows as
    constant ratios.
    """
    data = canonical_data(conn, p)
    pipe = pipeline(conn, data.diagram)
    es = pipe.series(p)
    c = pipe.core(es)
    S, _ = pipe.s_full(es, c)
    rng = np.random.default_rng(seed)
    Nm = rng.standard_normal((pipe.n, pipe.n))
    Nm = Nm + Nm.T
    out = []
    for e in eps:
        RS = pipe.curvature_map(es, S + Series.const(e * Nm, S.L)).value
        rep = validate_normalization(data, RS)
        out.append(rep.residuals.get("i", rep.worst))
    out = np.array(out)
    return {"eps": list(eps), "residuals": out.tolist(), "ratios": (out / np.array(eps)).tolist()}


# ---------------------------------------------------------------------------
# report


@dataclass
class CurvatureReport:
    model: str
    connection: str
    p: CovectorPoint
    diagram: YoungDiagramData
    data: CanonicalData = field(repr=False)
    curvature_matrix: np.ndarray | None
    ricci: dict
    final_box: FinalBoxResult | None
    normalization: NormalizationReport | None
    gaps: list

    def to_dict(self) -> dict:
        d = {"model": self.model, "connection": self.connection,
             "x": self.p.x.tolist(), "H": self.p.H.tolist(), "diagram": self.diagram.to_dict(),
             "ricci": self.ricci, "gaps": self.gaps,
             "residual_B": self.data.residual_B, "residual_C": self.data.residual_C}
        if self.curvature_matrix is not None:
            d["curvature_matrix"] = self.curvature_matrix.tolist()
            d["cells"] = [[a + 1, b + 1] for a, b in self.data.cells]
        if self.final_box is not None:
            d["final_box"] = {"value": self.final_box.value, "rank": self.final_box.rank,
                              "normalized": self.final_box.normalized(), "residual": self.final_box.residual}
        if self.normalization is not None:
            d["normalization"] = self.normalization.to_dict()
        return d


def curvature_report(conn: Connection, p: CovectorPoint, diagram: YoungDiagramData | None = None) -> CurvatureReport:
    data = canonical_data(conn, p, diagram)
    gaps = []
    Rm = norm = None
    if data.has_curvature and data.basis is not None:
        Rm = data.in_basis(data.RS)
        norm = validate_normalization(data)
    else:
        gaps.append(f"S beyond E is not determined for reduced diagram Y{data.diagram.reduced}")
    fb = final_box_ricci(conn, p)
    return CurvatureReport(conn.model.name, conn.name, p, data.diagram, data, Rm, ricci(data), fb, norm, gaps)
