"""Linear-quadratic comparison problems, conjugate times and diameter bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

GRID = 512
LQ_RTOL = 1e-12
LQ_ATOL = 1e-14


class DegenerateProblemError(ValueError):
    pass


def young_matrices(rows) -> tuple:
    """``(A, B)`` for a diagram given by row lengths.

    Cells are ordered row by row; ``A e_{a,b} = e_{a,b+1}`` shifts along a
    row and ``B`` injects one control per row into its first cell.
    """
    rows = [int(r) for r in rows]
    N = sum(rows)
    A = np.zeros((N, N))
    B = np.zeros((N, len(rows)))
    i = 0
    for a, r in enumerate(rows):
        B[i, a] = 1.0
        for b in range(r - 1):
            A[i + b + 1, i + b] = 1.0
        i += r
    return A, B


@dataclass
class LQProblem:
    """``x' = A x + B u`` with cost ``int |u|^2 - x^T q x``; ``q`` may be a callable of t."""

    A: np.ndarray
    B: np.ndarray
    q: object
    rows: tuple = field(default=())

    @classmethod
    def from_rows(cls, rows, q_diag) -> "LQProblem":
        A, B = young_matrices(rows)
        q = np.diag(np.asarray(q_diag, dtype=float))
        if q.shape != A.shape:
            raise ValueError(f"q needs {A.shape[0]} diagonal entries, got {len(q_diag)}")
        return cls(A, B, q, tuple(rows))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def q_at(self, t: float) -> np.ndarray:
        return np.asarray(self.q(t) if callable(self.q) else self.q, dtype=float)

    def hamiltonian_matrix(self, t: float = 0.0) -> np.ndarray:
        A, B = self.A, self.B
        return np.block([[-A.T, -self.q_at(t)], [B @ B.T, A]])

    @property
    def power(self) -> int:
        """Order of vanishing of ``det X(t)`` at 0 for a Young-diagram problem."""
        if self.rows:
            return sum(2 * b + 1 for r in self.rows for b in range(r))
        return self.n


def fundamental_solution(problem: LQProblem, t_max: float):
    """Dense solution of ``Z' = H(t) Z`` with ``Z(0) = (I, 0)``: top block p(t), bottom block x(t)."""
    n = problem.n
    Z0 = np.vstack([np.eye(n), np.zeros((n, n))])
    const = not callable(problem.q)
    Hc = problem.hamiltonian_matrix() if const else None

    def rhs(t, z):
        Hm = Hc if const else problem.hamiltonian_matrix(t)
        return (Hm @ z.reshape(2 * n, n)).ravel()

    sol = solve_ivp(rhs, (0.0, t_max), Z0.ravel(), method="DOP853", dense_output=True,
                    rtol=LQ_RTOL, atol=LQ_ATOL)
    if not sol.success:
        raise RuntimeError(f"LQ integration failed: {sol.message}")
    return sol.sol


def conjugate_time(problem: LQProblem, t_max: float, tol: float = 1e-10, grid: int = GRID) -> float | None:
    """First ``t`` in ``(0, t_max]`` where the ``p(0) -> x(t)`` block is singular, or None.

    Sign changes of ``det X(t) / t^power`` on the grid are bisected to
    ``tol``.  Zeros of even multiplicity do not change sign, so local minima of
    ``sigma_min(X) / sigma_max(Z)`` (Z the full fundamental
    matrix) are refined too and accepted below 1e-8.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    n, power = problem.n, problem.power
    sol = fundamental_solution(problem, t_max)

    def X(t):
        return sol(t).reshape(2 * n, n)[n:]

    def f(t):
        return float(np.linalg.det(X(t))) / t ** power

    def ratio(t):
        Z = sol(t).reshape(2 * n, n)
        return np.linalg.svd(Z[n:], compute_uv=False)[-1] / np.linalg.svd(Z, compute_uv=False)[0]

    ts = np.linspace(0.0, t_max, grid + 1)[1:]
    vals = np.array([f(t) for t in ts])
    rats = np.array([ratio(t) for t in ts])
    if np.all(rats < 1e-12):
        raise DegenerateProblemError("x-block is singular on the whole grid (uncontrollable problem?)")
    cands = []
    sgn = np.sign(vals)
    idx = np.nonzero(sgn[1:] * sgn[:-1] <= 0)[0]
    if sgn[0] <= 0:
        idx = np.concatenate([[-1], idx])
    if idx.size:
        j = idx[0]
        lo = ts[j] if j >= 0 else 1e-12 * t_max
        hi = ts[j + 1]
        flo = f(lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if np.sign(fm) == np.sign(flo) and fm != 0:
                lo, flo = mid, fm
            else:
                hi = mid
        cands.append(0.5 * (lo + hi))
    for j in range(1, grid - 1):
        if rats[j] <= rats[j - 1] and rats[j] <= rats[j + 1] and rats[j] < 0.1:
            if cands and ts[j - 1] > cands[0]:
                break
            res = minimize_scalar(ratio, bounds=(ts[j - 1], ts[j + 1]), method="bounded",
                                  options={"xatol": tol})
            if res.fun < 1e-8:
                cands.append(float(res.x))
                break
    return min(cands) if cands else None


def bm_polynomial_check(ks) -> dict:
    """Roots of ``x^{2m} - sum_{b<m} (-1)^{m-b} k_{m-b} x^{2b}`` through ``y = x^2``.

    ``has_root`` is true when some root is simple and purely imaginary,
    i.e. ``y`` has a simple negative real root.
    """
    ks = [float(k) for k in ks]
    m = len(ks)
    if m < 1:
        raise ValueError("need at least one coefficient")
    # coefficients of y^m, y^{m-1}, ..., y^0
    coeffs = [1.0] + [-((-1.0) ** (m - b)) * ks[m - b - 1] for b in range(m - 1, -1, -1)]
    y = np.roots(coeffs)
    scale = max(1.0, max(abs(k) for k in ks))
    simple_neg = []
    for i, r in enumerate(y):
        if abs(r.imag) <= 1e-9 * scale and r.real < -1e-12 * scale:
            others = np.delete(y, i)
            if not np.any(np.abs(others - r) < 1e-7 * scale):
                simple_neg.append(float(r.real))
    x = np.concatenate([np.sqrt(y.astype(complex)), -np.sqrt(y.astype(complex))])
    return {"has_root": bool(simple_neg), "y_roots": y.tolist(), "x_roots": x.tolist(),
            "simple_negative_y": simple_neg, "coefficients": coeffs}


# ---------------------------------------------------------------------------
# diameter bounds


FINAL_BOX_ROUTE = "final-box Ricci bound, Riemannian type: pi/sqrt(k)"
PROFILE_ROUTE = "first-row Ricci profile of Y(2,1) with LQ comparison: t_c(Y^2, q_{k1,k2})"


def unit_covectors(model, samples: int, seed: int = 0, h_max: float = 3.0, box=None) -> list:
    """Deterministic sample of covectors with ``|sharp p| = 1``.

    Base points are uniform in ``box`` (default: the middle half of the
    model domain); vertical momenta run over a grid on ``[-h_max, h_max]``
    that contains 0, and horizontal directions are uniform on the sphere.
    """
    from .model import CovectorPoint

    rng = np.random.default_rng(seed)
    n, d1 = model.n, model.d1
    if box is None:
        dom = np.asarray(model.domain, dtype=float)
        dom = np.where(np.isfinite(dom), dom, np.sign(dom))
        mid, half = dom.mean(axis=1), 0.25 * (dom[:, 1] - dom[:, 0])
        box = np.stack([mid - half, mid + half], axis=1)
    box = np.asarray(box, dtype=float)
    k = n - d1
    hs = np.linspace(-h_max, h_max, 2 * (samples // 2) + 1)[:samples] if k else np.zeros(samples)
    if k and 0.0 not in hs:
        hs[0] = 0.0
    out = []
    for i in range(samples):
        x = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(n)
        u = rng.standard_normal(d1)
        u /= np.linalg.norm(u)
        H = np.zeros(n)
        H[:d1] = u
        if k:
            v = rng.standard_normal(k)
            v *= hs[i] / np.linalg.norm(v)
            H[d1:] = v
        out.append(CovectorPoint(x, H))
    return out


@dataclass
class BoundRoute:
    route: str
    applicable: bool
    k: list
    bound: float | None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"route": self.route, "applicable": self.applicable, "k": self.k,
                "bound": self.bound, "reason": self.reason}


@dataclass
class DiameterBoundReport:
    model: str
    connection: str
    samples: int
    seed: int
    routes: list
    note: str = "infima are sampled estimates over the stated covector sample, not proofs"

    @property
    def bound(self) -> float | None:
        vals = [r.bound for r in self.routes if r.bound is not None]
        return min(vals) if vals else None

    def to_dict(self) -> dict:
        return {"model": self.model, "connection": self.connection, "samples": self.samples,
                "seed": self.seed, "bound": self.bound, "routes": [r.to_dict() for r in self.routes],
                "note": self.note}


def diameter_bound(model, conn, samples: int = 50, seed: int = 0, h_max: float = 3.0,
                   t_max: float = 100.0, box=None) -> DiameterBoundReport:
    """Sampled Bonnet-Myers bounds by two labelled routes.

    Final-box route: ``k = inf underline-Ric / (rank - 1)`` over unit covectors,
    needs final-box rank above one, bound ``pi / sqrt(k)``.
    Profile route (reduced diagram Y(2,1)): ``k_b = inf Ric(1,b) / rank Box(1,1)``,
    bound ``t_c(Y^2, q_{k1,k2})`` when the comparison polynomial has a simple
    purely imaginary root.
    """
    from .canonical import DegenerateCovectorError, canonical_data, final_box_ricci, ricci

    pts = unit_covectors(model, samples, seed, h_max, box)
    fb_vals, fb_ok = [], True
    prof, prof_ok = [], True
    shapes = set()
    for p in pts:
        fb = final_box_ricci(conn, p)
        if fb.rank > 1:
            fb_vals.append(fb.normalized())
        else:
            fb_ok = False
        try:
            data = canonical_data(conn, p)
        except (DegenerateCovectorError, ValueError):
            prof_ok = False
            continue
        shapes.add(data.diagram.reduced)
        if data.diagram.reduced == (2, 1):
            r = ricci(data)
            r1 = data.boxes.bases[0].shape[1]
            prof.append((r["Ric(1,1)"] / r1, r["Ric(1,2)"] / r1))
        else:
            prof_ok = False
    routes = []
    if fb_ok and fb_vals:
        k = float(min(fb_vals))
        b = float(np.pi / np.sqrt(k)) if k > 0 else None
        routes.append(BoundRoute(FINAL_BOX_ROUTE, True, [k], b, "" if b else "non-positive sampled infimum: no bound"))
    else:
        routes.append(BoundRoute(FINAL_BOX_ROUTE, False, [], None, "final box of rank <= 1 at some sample"))
    if prof_ok and prof:
        ks = [float(min(v[0] for v in prof)), float(min(v[1] for v in prof))]
        chk = bm_polynomial_check(ks)
        b = None
        reason = ""
        if ks[0] <= 0:
            reason = "non-positive sampled infimum of Ric(1,1): no bound"
        elif not chk["has_root"]:
            reason = "comparison polynomial has no simple purely imaginary root: no bound"
        else:
            b = conjugate_time(LQProblem.from_rows([2], ks), t_max)
            if b is None:
                reason = f"no conjugate time up to t_max = {t_max:g}"
        routes.append(BoundRoute(PROFILE_ROUTE, True, ks, b, reason))
    else:
        routes.append(BoundRoute(PROFILE_ROUTE, False, [], None,
                                 f"reduced diagrams {sorted(shapes)} are not all Y(2,1)"))
    return DiameterBoundReport(model.name, conn.name, len(pts), seed, routes)
