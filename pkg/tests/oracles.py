"""Independent reference computations used by the tests.

None of these go through the connection or series code: they use
coordinate formulas, closed-form solutions or finite differences.
"""

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from srcurv.expr import coordinates


def bracket_fd(model, x, h=1e-5):
    """Structure constants from central differences of the numeric frame matrix."""
    n = model.n
    F = model.frame_matrix(x)  # F[mu, i]: coefficient of d/dx_mu in X_i
    dF = np.zeros((n, n, n))  # dF[nu, mu, i] = d_nu F[mu, i]
    for nu in range(n):
        e = np.zeros(n)
        e[nu] = h
        dF[nu] = (model.frame_matrix(x + e) - model.frame_matrix(x - e)) / (2 * h)
    br = np.einsum("ni,nmj->mij", F, dF) - np.einsum("nj,nmi->mij", F, dF)
    return np.einsum("km,mij->kij", np.linalg.inv(F), br)


def heisenberg_geodesic(H, t):
    """Closed-form Heisenberg extremal from the origin, frame X=dx-y/2 dz, Y=dy+x/2 dz."""
    a, b, h = H
    if abs(h) < 1e-12:
        return np.array([a * t, b * t, 0.0]), np.array([a, b, h])
    c, s = np.cos(h * t), np.sin(h * t)
    Ht = np.array([a * c - b * s, a * s + b * c, h])
    x = (a * s - b * (1 - c)) / h
    y = (b * s + a * (1 - c)) / h
    z = 0.5 * (a * a + b * b) * (h * t - s) / h ** 2
    return np.array([x, y, z]), Ht


class CoordinateLeviCivita:
    """Riemannian geodesics and parallel transport from coordinate Christoffels of g = (F F^T)^-1."""

    def __init__(self, model):
        n = model.n
        xs = coordinates(n)
        F = sp.Matrix([[model.frame[i][mu].expr for i in range(n)] for mu in range(n)])
        g = sp.simplify((F * F.T).inv())
        gi = sp.simplify(g.inv())
        Gam = [[[sp.simplify(sum(gi[a, d] * (sp.diff(g[d, b], xs[c]) + sp.diff(g[d, c], xs[b])
                                              - sp.diff(g[b, c], xs[d])) for d in range(n)) / 2)
                 for c in range(n)] for b in range(n)] for a in range(n)]
        self.n = n
        self.F = sp.lambdify([xs], F, "numpy")
        self.G = sp.lambdify([xs], Gam, "numpy")

    def transport(self, x0, v0, W0, ts):
        n = self.n
        k = W0.shape[1]

        def rhs(t, z):
            x, v, W = z[:n], z[n:2 * n], z[2 * n:].reshape(n, k)
            G = np.asarray(self.G(x), dtype=float)
            return np.concatenate([v, -np.einsum("abc,b,c->a", G, v, v), -np.einsum("abc,b,ck->ak", G, v, W).ravel()])

        z0 = np.concatenate([x0, v0, W0.ravel()])
        sol = solve_ivp(rhs, (ts[0], ts[-1]), z0, method="DOP853", t_eval=ts, rtol=1e-12, atol=1e-13)
        X = sol.y[:n].T
        W = sol.y[2 * n:].T.reshape(-1, n, k)
        return X, W

    def frame_components(self, x, W):
        return np.linalg.solve(np.asarray(self.F(x), dtype=float), W)


def htype_ricci(d1, d2, h):
    """Flat H-type Ricci invariants at |sharp p| = 1 from the term-by-term expansion."""
    ric21 = 0.5 * (d1 - d2 - 1) * 0.5 * h * h
    ric11 = (d2 / 4 - 0.25 + 1 + 9 * (d2 - 1) / 8) * h * h
    ric12 = (0.25 * 9 / 16 * (d2 - 1) - 0.25 * 81 / 64 * (d2 - 1)) * h ** 4
    return {"Ric(2,1)": ric21, "Ric(1,1)": ric11, "Ric(1,2)": ric12}


def martinet_expected(x, H):
    """Diagram columns: Y(2,1) when x != 0 and sharp p != 0, Y(2) on x = 0."""
    if np.hypot(H[0], H[1]) == 0:
        return None
    return (2, 1) if x != 0 else (2,)
