"""Affine connections in frame components and their derived tensors.

Index conventions (0-based arrays):

* ``gamma[k, i, j]``: ``nabla_{X_i} X_j = sum_k gamma[k, i, j] X_k``;
* ``c[k, i, j]``: ``[X_i, X_j] = sum_k c[k, i, j] X_k``;
* ``T[k, i, j]``: ``T(X_i, X_j) = gamma[k,i,j] - gamma[k,j,i] - c[k,i,j]``;
* ``R[l, k, i, j]``: ``R(X_i, X_j) X_k = sum_l R[l, k, i, j] X_l``;
* covariant derivatives put the new (lower) slot first:
  ``nT[m, l, i, j] = (nabla_{X_m} T)^l_{ij}`` and
  ``nnT[a, m, l, i, j] = (nabla^2_{X_a, X_m} T)^l_{ij}``.

Tensors are jax functions of the base point, so every derivative of the
frame coefficients is taken by automatic differentiation of closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import jax
import jax.numpy as jnp
import numpy as np

from .model import SubRiemannianModel


def structure_constants_fn(model: SubRiemannianModel):
    n = model.n
    frame = model.jax_frame
    coframe = model.jax_coframe
    dframe = jax.jacfwd(frame)

    def c(x):
        F = frame(x)
        D = dframe(x)  # D[mu, i, nu] = d_nu F[mu, i]
        br = jnp.einsum("ni,mjn->mij", F, D) - jnp.einsum("nj,min->mij", F, D)
        return jnp.einsum("km,mij->kij", coframe(x), br)

    return c


def frame_derivative(model: SubRiemannianModel, f):
    """Return ``x -> df`` with ``df[m, ...] = X_m(f)`` for an array-valued ``f``."""
    frame = model.jax_frame
    jf = jax.jacfwd(f)

    def d(x):
        return jnp.moveaxis(jf(x) @ frame(x), -1, 0)

    return d


def covariant_derivative(model: SubRiemannianModel, gamma, f, valence: str):
    """Covariant derivative of a frame tensor field.

    ``valence`` lists the index types of ``f`` in order, 'u' for a vector
    (upper) slot and 'd' for a covector (lower) slot.  The result carries the
    differentiating slot first.
    """
    df = frame_derivative(model, f)

    def nf(x):
        t = f(x)
        G = gamma(x)
        out = df(x)
        for pos, v in enumerate(valence):
            if v == "u":
                tmp = jnp.tensordot(G, t, axes=([2], [pos]))  # (k, m, rest)
                out = out + jnp.moveaxis(tmp, 0, pos + 1)
            else:
                tmp = jnp.tensordot(G, t, axes=([0], [pos]))  # (m, i, rest)
                out = out - jnp.moveaxis(tmp, 1, pos + 1)
        return out

    return nf


@dataclass(frozen=True)
class Connection:
    """Affine connection on a model given by frame Christoffel symbols.

    ``gamma_fn`` is a jax-traceable ``x -> gamma[k, i, j]``.  ``linear``,
    when given, computes the same Christoffels from the structure constants
    ``C`` (a linear map, applied over any leading axes) with array module
    ``xp``; the Taylor-series calculus needs it.
    """

    model: SubRiemannianModel
    gamma_fn: object = field(repr=False)
    name: str = "connection"
    linear: object = field(default=None, repr=False, compare=False)

    # jax tensor fields -------------------------------------------------
    @cached_property
    def structure_fn(self):
        return structure_constants_fn(self.model)

    @cached_property
    def torsion_fn(self):
        g, c = self.gamma_fn, self.structure_fn

        def T(x):
            G = g(x)
            return G - jnp.swapaxes(G, 1, 2) - c(x)

        return T

    @cached_property
    def curvature_fn(self):
        g, c = self.gamma_fn, self.structure_fn
        dg = frame_derivative(self.model, g)

        def R(x):
            G = g(x)
            XG = dg(x)  # XG[m, l, j, k] = X_m(gamma[l, j, k])
            C = c(x)
            r = jnp.einsum("iljk->lkij", XG) - jnp.einsum("jlik->lkij", XG)
            r = r + jnp.einsum("mjk,lim->lkij", G, G) - jnp.einsum("mik,ljm->lkij", G, G)
            return r - jnp.einsum("mij,lmk->lkij", C, G)

        return R

    @cached_property
    def nabla_torsion_fn(self):
        return covariant_derivative(self.model, self.gamma_fn, self.torsion_fn, "udd")

    @cached_property
    def nabla2_torsion_fn(self):
        return covariant_derivative(self.model, self.gamma_fn, self.nabla_torsion_fn, "dudd")

    @cached_property
    def _jit(self):
        return {
            "gamma": jax.jit(self.gamma_fn),
            "c": jax.jit(self.structure_fn),
            "T": jax.jit(self.torsion_fn),
            "R": jax.jit(self.curvature_fn),
            "nT": jax.jit(self.nabla_torsion_fn),
            "nnT": jax.jit(self.nabla2_torsion_fn),
        }

    def _eval(self, key, x):
        self.model.check_domain(x)
        return np.asarray(self._jit[key](jnp.asarray(x, dtype=float)))

    # numpy evaluation --------------------------------------------------
    def christoffel(self, x) -> np.ndarray:
        return self._eval("gamma", x)

    def structure_constants(self, x) -> np.ndarray:
        return self._eval("c", x)

    def adjoint(self) -> "Connection":
        """The connection ``nabla - T``."""
        g, T = self.gamma_fn, self.torsion_fn
        name = self.name[:-8] if self.name.endswith(":adjoint") else self.name + ":adjoint"
        lin = None
        if self.linear is not None:
            def lin(C, xp=jnp, f=self.linear):
                return xp.swapaxes(f(C, xp), -1, -2) + C
        return Connection(self.model, lambda x: g(x) - T(x), name, lin)


def torsion(conn: Connection, x) -> np.ndarray:
    return conn._eval("T", x)


def curvature(conn: Connection, x) -> np.ndarray:
    return conn._eval("R", x)


def nabla_torsion(conn: Connection, x, order: int = 1) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return conn._eval("nT" if order == 1 else "nnT", x)


def adjoint(conn: Connection) -> Connection:
    return conn.adjoint()


def _split_masks(model):
    e = jnp.asarray(model.horizontal_mask)
    return e, 1.0 - e


def koszul(C, xp=jnp):
    """Levi-Civita Christoffels of an orthonormal frame from its structure constants."""
    return 0.5 * (C - xp.einsum("...ijk->...kij", C) + xp.einsum("...jki->...kij", C))


def levi_civita_taming_fn(model: SubRiemannianModel):
    """Koszul formula in an orthonormal frame: 2<nabla_i X_j, X_k> = c^k_ij - c^i_jk + c^j_ki."""
    c = structure_constants_fn(model)
    return lambda x: koszul(c(x))


def _nice_linear(model: SubRiemannianModel):
    e = np.asarray(model.horizontal_mask, dtype=float)
    a = 1.0 - e
    ee = e[:, None, None] * e[None, :, None] * e[None, None, :]
    ae = e[:, None, None] * a[None, :, None] * e[None, None, :]
    ea = a[:, None, None] * e[None, :, None] * a[None, None, :]
    aa = a[:, None, None] * a[None, :, None] * a[None, None, :]

    def gamma(C, xp=jnp):
        L = koszul(C, xp)
        mixed = 0.5 * (C - xp.einsum("...jik->...kij", C))
        return ee * L + ae * mixed + ea * C + aa * L

    return gamma


def build_compatible(model: SubRiemannianModel) -> Connection:
    """Compatible connection assembled from the taming metric.

    horizontal on horizontal: E-projection of the taming Levi-Civita;
    vertical on horizontal: pr_E[Z, X] + tau_Z X where
        <tau_Z X, Y> = 1/2 (L_Z pr_E^* g)(X, Y) = -1/2 (c^Y_ZX + c^X_ZY),
        so the E-component k of nabla_{X_i} X_j is 1/2 (c^k_ij - c^j_ik);
    horizontal on vertical: pr_A[X, Z];
    vertical on vertical: A-projection of the taming Levi-Civita.
    """
    c = structure_constants_fn(model)
    lin = _nice_linear(model)
    return Connection(model, lambda x: lin(c(x)), "nice", lin)


def frame_flat_connection(model: SubRiemannianModel) -> Connection:
    """Connection making every frame field parallel (zero Christoffels).

    For left-invariant frames on groups this is the group connection; it is
    compatible for any frame adapted to E since the frame is orthonormal.
    """
    n = model.n

    def gamma(x):
        return jnp.zeros((n, n, n)) + 0.0 * x[0]

    return Connection(model, gamma, "group", lambda C, xp=jnp: 0.0 * C)


def tau_fn(model: SubRiemannianModel):
    """``tau[k, i, j]`` = E-component k of tau_{X_i} X_j (i vertical, j horizontal)."""
    c = structure_constants_fn(model)
    e, a = _split_masks(model)

    def tau(x):
        C = c(x)
        t = -0.5 * (C + jnp.einsum("jik->kij", C))
        return t * e[:, None, None] * a[None, :, None] * e[None, None, :]

    return tau


def k_tensor_fn(model: SubRiemannianModel):
    """K(X, Y) = -pr_E[pr_A X, pr_A Y] - pr_A[pr_E X, pr_E Y] in frame components."""
    c = structure_constants_fn(model)
    e, a = _split_masks(model)

    def K(x):
        C = c(x)
        m = e[:, None, None] * a[None, :, None] * a[None, None, :] + a[:, None, None] * e[None, :, None] * e[None, None, :]
        return -C * m

    return K


def connection_by_name(model: SubRiemannianModel, name: str) -> Connection:
    if name == "nice":
        return build_compatible(model)
    if name in ("group", "flat"):
        return frame_flat_connection(model)
    raise ValueError(f"unknown connection {name!r}; expected 'nice' or 'group'")


# ---------------------------------------------------------------------------
# validators


@dataclass
class IdentityReport:
    residuals: dict
    tol: float
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {"residuals": self.residuals, "tol": self.tol, "failures": self.failures, "ok": self.ok}


def check_compatibility(conn: Connection, x, tol: float = 1e-10) -> dict:
    """Residuals of E- and A-preservation and metric compatibility on E."""
    G = conn.christoffel(x)
    d = conn.model.d1
    pres_e = float(np.max(np.abs(G[d:, :, :d]), initial=0.0))
    pres_a = float(np.max(np.abs(G[:d, :, d:]), initial=0.0))
    Ge = G[:d, :, :d]
    metric = float(np.max(np.abs(Ge + np.swapaxes(Ge, 0, 2)), initial=0.0))
    return {"E_preservation": pres_e, "A_preservation": pres_a, "metric": metric,
            "ok": max(pres_e, pres_a, metric) <= tol}


def _cyclic(f):
    return f + jnp.einsum("lijk->ljki", f) + jnp.einsum("lijk->lkij", f)


def _bianchi_parts(conn: Connection):
    T, R, nT = conn.torsion_fn, conn.curvature_fn, conn.nabla_torsion_fn

    def parts(x):
        t = T(x)
        r = jnp.einsum("lkij->lijk", R(x))  # r[l, i, j, k] = R(X_i, X_j) X_k
        lhs = _cyclic(r)
        tt = jnp.einsum("lmk,mij->lijk", t, t)  # T(T(X_i, X_j), X_k)
        nt = jnp.einsum("iljk->lijk", nT(x))  # (nabla_i T)(X_j, X_k)
        rhs = _cyclic(nt) + _cyclic(tt)
        return r, lhs, rhs

    return parts


def validate_identities(conn: Connection, points, tol: float = 1e-8) -> IdentityReport:
    """Check curvature identities with torsion at the given base points.

    * cyclic Bianchi identity with torsion;
    * for X, Y horizontal and Z vertical, R(X,Y)Z = pr_A B_Z(Y)X and
      R(X,Z)Y = 1/2 pr_E B_Z(X)Y - 1/2 (pr_E B_Z(Y))^T X - 1/2 (pr_E B_Z(X))^T Y,
      with B_Z(Y)X the cyclic sum of (nabla_X T)(Y,Z) + T(T(X,Y),Z);
    * for the taming-metric connection, the expressions of R(X,Y)Z and R(X,Z)Y
      through K, tau and their derivatives.
    """
    model = conn.model
    n, d = model.n, model.d1
    parts = jax.jit(_bianchi_parts(conn))
    nice = conn.name == "nice"
    if nice:
        K = k_tensor_fn(model)
        tau = tau_fn(model)
        nK = jax.jit(covariant_derivative(model, conn.gamma_fn, K, "udd"))
        ntau = jax.jit(covariant_derivative(model, conn.gamma_fn, tau, "udd"))
        Kj, tauj = jax.jit(K), jax.jit(tau)
    res = {"bianchi": 0.0, "HHV": 0.0, "HVH": 0.0}
    if nice:
        res.update({"RXYZ_nice": 0.0, "RXZY_nice": 0.0})
    failures = []
    E, A = slice(0, d), slice(d, n)
    for x in points:
        model.check_domain(x)
        xj = jnp.asarray(x, dtype=float)
        r, lhs, rhs = (np.asarray(v) for v in parts(xj))
        vals = {"bianchi": float(np.max(np.abs(lhs - rhs)))}
        if d < n:
            # rhs[l, i, j, k] = B(X_i, X_j, X_k) = B_{X_k}(X_j) X_i
            vals["HHV"] = float(np.max(np.abs(r[A, E, E, A] - rhs[A, E, E, A])))
            lhs2 = np.einsum("likj->lijk", r)  # R(X_i, Z_k) Y_j
            t1 = 0.5 * np.einsum("ljik->lijk", rhs)  # B_Z(X) Y
            t2 = 0.5 * np.einsum("iljk->lijk", rhs)  # (B_Z(Y))^T X
            t3 = 0.5 * np.einsum("jlik->lijk", rhs)  # (B_Z(X))^T Y
            vals["HVH"] = float(np.max(np.abs((lhs2 - (t1 - t2 - t3))[E, E, E, A])))
            if nice:
                k = np.asarray(Kj(xj))
                ta = np.asarray(tauj(xj))
                nk = np.asarray(nK(xj))
                nta = np.asarray(ntau(xj))
                pred = (np.einsum("klij->lijk", nk) + np.einsum("lsj,ski->lijk", k, ta)
                        + np.einsum("lis,skj->lijk", k, ta))
                vals["RXYZ_nice"] = float(np.max(np.abs((r - pred)[:, E, E, A])))
                KK = np.einsum("lkp,pij->lkij", k, k)  # K_{X_k} K_{X_i} X_j
                pred2 = (np.einsum("ljki->lijk", nta) - np.einsum("jlki->lijk", nta)
                         + 0.5 * np.einsum("lkij->lijk", KK) - 0.5 * np.einsum("ikjl->lijk", KK)
                         - 0.5 * np.einsum("jkil->lijk", KK))
                vals["RXZY_nice"] = float(np.max(np.abs((lhs2 - pred2)[E, E, E, A])))
        for key, v in vals.items():
            res[key] = max(res.get(key, 0.0), v)
            if v > tol:
                failures.append({"identity": key, "point": [float(t) for t in x], "residual": v})
    return IdentityReport(res, tol, failures)
