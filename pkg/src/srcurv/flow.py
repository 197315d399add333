"""Normal extremals, parallel transport along them, and the transport oracle for twist maps.

The extremal ODE in frame momenta is

    x' = sum_{i<=d1} H_i X_i(x),    H_k' = sum_{i<=d1, l} H_i H_l hat_gamma[l, i, k](x)

where ``hat_gamma`` are the Christoffels of the adjoint connection.  Transported
frames solve ``M' + gamma(x') M = 0`` in frame components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np
from scipy.integrate import solve_ivp

from .connections import Connection
from .model import CovectorPoint, DomainError, hamiltonian

RTOL = 1e-10
ATOL = 1e-11


class IntegrationError(RuntimeError):
    pass


def _rhs_factory(conn: Connection, transports: tuple):
    """Jitted right-hand side for (x, H, M_1, ..., M_m) flattened."""
    model = conn.model
    n = model.n
    mask = jnp.asarray(model.horizontal_mask)
    frame = model.jax_frame
    ghat = conn.adjoint().gamma_fn
    gammas = [c.gamma_fn for c in transports]

    def rhs(z):
        x, H = z[:n], z[n:2 * n]
        s = mask * H
        out = [frame(x) @ s, jnp.einsum("i,l,lik->k", s, H, ghat(x))]
        for k, g in enumerate(gammas):
            M = z[2 * n + k * n * n: 2 * n + (k + 1) * n * n].reshape(n, n)
            Gs = jnp.einsum("i,kij->kj", s, g(x))
            out.append((-Gs @ M).ravel())
        return jnp.concatenate(out)

    return jax.jit(rhs)


_RHS_CACHE: dict = {}


def _rhs(conn: Connection, transports: tuple):
    key = (id(conn), tuple(id(c) for c in transports))
    hit = _RHS_CACHE.get(key)
    if hit is None or hit[0] is not conn:
        f = _rhs_factory(conn, transports)
        hit = (conn, transports, f)
        _RHS_CACHE[key] = hit
    return hit[2]


def _domain_event(model):
    lo, hi = model.domain[:, 0], model.domain[:, 1]
    n = model.n

    def event(t, z):
        x = z[:n]
        return float(min(np.min(x - lo), np.min(hi - x)))

    event.terminal = True
    return event


def _solve(conn, transports, p: CovectorPoint, t_end, t_eval=None, method="RK45",
           rtol=RTOL, atol=ATOL, dense=True):
    model = conn.model
    model.check_domain(p.x)
    n = model.n
    f = _rhs(conn, tuple(transports))
    z0 = np.concatenate([p.x, p.H] + [np.eye(n).ravel() for _ in transports])

    def fun(t, z):
        return np.asarray(f(z))

    sol = solve_ivp(fun, (0.0, t_end), z0, method=method, rtol=rtol, atol=atol, t_eval=t_eval,
                    dense_output=dense, events=_domain_event(model))
    if sol.status == -1:
        raise IntegrationError(sol.message)
    return sol


@dataclass
class Extremal:
    """Integrated normal extremal with dense output.

    ``states[j] = (x, H)`` at ``t[j]``; ``exited`` is set when the curve left
    the chart box before ``t_end``, in which case ``t[-1]`` is the exit time.
    """

    p: CovectorPoint
    conn: Connection = field(repr=False)
    t: np.ndarray
    states: np.ndarray
    sol: object = field(repr=False)
    exited: bool = False
    nfev: int = 0

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def state(self, t) -> np.ndarray:
        n = self.conn.model.n
        return self.sol(t)[: 2 * n]

    def covector(self, t) -> CovectorPoint:
        n = self.conn.model.n
        z = self.state(t)
        return CovectorPoint(z[:n], z[n:])

    def x(self, t) -> np.ndarray:
        return self.state(t)[: self.conn.model.n]

    def H(self, t) -> np.ndarray:
        n = self.conn.model.n
        return self.state(t)[n: 2 * n]

    def energy_drift(self) -> float:
        n = self.conn.model.n
        d = self.conn.model.d1
        h0 = hamiltonian(self.conn.model, self.p)
        e = 0.5 * np.sum(self.states[:, n: n + d] ** 2, axis=1)
        return float(np.max(np.abs(e - h0)) / max(1.0, h0))


def integrate_extremal(model, conn: Connection, p: CovectorPoint, t_end: float,
                       rtol: float = RTOL, atol: float = ATOL, t_eval=None) -> Extremal:
    """Integrate the normal extremal from ``p`` on ``[0, t_end]`` (negative ``t_end`` runs backwards)."""
    if conn.model is not model:
        raise ValueError("connection belongs to a different model")
    if t_end == 0:
        raise ValueError("t_end must be nonzero")
    sol = _solve(conn, (), p, t_end, t_eval=t_eval, rtol=rtol, atol=atol)
    n = model.n
    return Extremal(p, conn, sol.t, sol.y[: 2 * n].T, sol.sol, exited=sol.status == 1, nfev=sol.nfev)


@dataclass
class TransportFrame:
    """``M(t)[k, j]``: k-th frame component of the transport of ``X_j(0)``."""

    t: np.ndarray
    M: np.ndarray
    connection: str

    def at(self, j: int = -1) -> np.ndarray:
        return self.M[j]


def parallel_transport(conn: Connection, extremal: Extremal, t, rtol: float = RTOL,
                       atol: float = ATOL) -> TransportFrame:
    """Transport the frame at ``extremal.p`` with ``conn`` to the times ``t``.

    The extremal is re-integrated jointly with the transport equation so the
    transported matrices carry the same step control.  Pass ``conn.adjoint()``
    for the adjoint transport.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.abs(ts) > abs(extremal.t_end) + 1e-12) or np.any(np.sign(ts) * np.sign(extremal.t_end) < 0):
        raise ValueError("transport times outside the extremal range")
    n = conn.model.n
    t_last = float(ts[np.argmax(np.abs(ts))])
    if t_last == 0.0:
        return TransportFrame(ts, np.repeat(np.eye(n)[None], len(ts), axis=0), conn.name)
    sol = _solve(extremal.conn, (conn,), extremal.p, t_last, rtol=rtol, atol=atol)
    if sol.status == 1:
        raise DomainError("extremal left the chart during transport")
    Ms = np.array([sol.sol(s)[2 * n:].reshape(n, n) for s in ts])
    return TransportFrame(ts, Ms, conn.name)


# ---------------------------------------------------------------------------
# transport oracle


H_GRID = (1e-2, 5e-3, 2.5e-3)

# central stencils on offsets -2..2, second order accurate
_STENCILS = {
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def stencil_states(conn: Connection, p: CovectorPoint, h_grid=H_GRID, transports=(),
                   method="DOP853", rtol=1e-13, atol=1e-14) -> dict:
    """States ``(x, H, M_1, ...)`` at ``t = j h``, ``j = -2..2``, keyed by ``(h, j)``.

    Two integrations (forward and backward) cover every step size.
    """
    n = conn.model.n
    z0 = np.concatenate([p.x, p.H] + [np.eye(n).ravel() for _ in transports])
    out = {(h, 0): z0 for h in h_grid}
    times = sorted({round(j * h, 15) for h in h_grid for j in (1, 2)})
    for sign in (1, -1):
        ts = [sign * t for t in times]
        sol = _solve(conn, tuple(transports), p, ts[-1], t_eval=ts, method=method, rtol=rtol,
                     atol=atol, dense=False)
        if sol.status == 1 or sol.y.shape[1] < len(ts):
            raise DomainError("stencil leaves the chart")
        for col, t in enumerate(times):
            for h in h_grid:
                j = t / h
                if abs(j - round(j)) < 1e-9 and round(j) in (1, 2):
                    out[(h, sign * int(round(j)))] = sol.y[:, col]
    return out


def _twist_transport_values(conn: Connection, p: CovectorPoint, h_grid) -> dict:
    """``hat//_t^{-1} //_t`` at ``t = -2h..2h`` for every h."""
    n = conn.model.n
    st = stencil_states(conn, p, h_grid, (conn, conn.adjoint()))
    vals = {}
    for h in h_grid:
        rows = []
        for j in range(-2, 3):
            z = st[(h, j)]
            M = z[2 * n: 2 * n + n * n].reshape(n, n)
            Mh = z[2 * n + n * n:].reshape(n, n)
            rows.append(np.linalg.solve(Mh, M))
        vals[h] = np.array(rows)
    return vals


def richardson(values, ratio: float = 2.0, power: int = 2) -> np.ndarray:
    """Extrapolate a sequence of estimates at h, h/ratio, ... with error series in h^power."""
    table = [np.asarray(v, dtype=float) for v in values]
    k = power
    while len(table) > 1:
        f = ratio ** k
        table = [(f * table[i + 1] - table[i]) / (f - 1) for i in range(len(table) - 1)]
        k += power
    return table[0]


def stencil_derivative(samples, h: float, k: int) -> np.ndarray:
    """k-th derivative at 0 from samples at offsets -2h..2h (leading axis)."""
    w = _STENCILS[k]
    return np.tensordot(w, np.asarray(samples), axes=(0, 0)) / h ** k


def transport_twist_oracle_all(conn: Connection, p: CovectorPoint, k_max: int = 3,
                               h_grid=H_GRID) -> list:
    """``[P_1, ..., P_kmax]`` from one set of transport stencils."""
    if not 1 <= k_max <= 4:
        raise ValueError("k must be in 1..4")
    vals = _twist_transport_values(conn, p, h_grid)
    return [richardson([stencil_derivative(vals[h], h, k) for h in h_grid]) for k in range(1, k_max + 1)]


def transport_twist_oracle(conn: Connection, p: CovectorPoint, k: int, h_grid=H_GRID) -> np.ndarray:
    """``P_k`` as the k-th time derivative of ``hat//_t^{-1} //_t`` at 0.

    Central differences are second order; Richardson over the three step
    sizes removes the h^2 and h^4 terms.  Roundoff grows like eps / h^k, which
    is the limiting error for k = 3, 4.
    """
    return transport_twist_oracle_all(conn, p, k, h_grid)[k - 1]
