"""Sub-Riemannian structures given by an orthonormal frame on a coordinate box.

Conventions
-----------
The frame is ``X_1..X_n``; the first ``d1`` fields span the horizontal bundle
E and are g-orthonormal, the whole frame is orthonormal for the taming metric.
Covectors are stored through frame momenta ``H_i = p(X_i)``, so the cometric
is ``diag(1,..,1,0,..,0)`` and the musical map just truncates.

Arrays use 0-based indices.  ``frame_matrix(x)[mu, i]`` is the ``d/dx_mu``
coefficient of ``X_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from .expr import ScalarExpr, as_expr, matrix_function, sympy_matrix_function


class DomainError(ValueError):
    """Point outside the chart box."""


class FrameDegeneracyError(ValueError):
    """Frame matrix is singular at a point."""


@dataclass(frozen=True)
class CovectorPoint:
    """Covector at ``x`` stored by its frame momenta ``H_i = p(X_i)``."""

    x: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).copy())
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float).copy())
        if self.x.shape != self.H.shape:
            raise ValueError("x and H must have the same length")

    def scaled(self, c: float) -> "CovectorPoint":
        return CovectorPoint(self.x, c * self.H)


class SubRiemannianModel:
    """Chart, frame and horizontal rank of a sub-Riemannian manifold.

    Parameters
    ----------
    name : label used in reports.
    frame : ``frame[i][mu]`` is the coefficient of ``d/dx_mu`` in ``X_i``;
        entries may be ScalarExpr, sympy expressions, numbers or strings in the
        model-file grammar.
    horizontal_rank : d1, number of leading frame fields spanning E.
    domain : ``[[lo, hi], ...]`` box bounds per coordinate.
    """

    def __init__(self, name: str, frame, horizontal_rank: int, domain=None):
        n = len(frame)
        if any(len(row) != n for row in frame):
            raise ValueError("frame must be n vector fields with n coefficients each")
        if not 1 <= horizontal_rank <= n:
            raise ValueError("horizontal rank must satisfy 1 <= d1 <= n")
        self.name = name
        self.n = n
        self.d1 = int(horizontal_rank)
        self.frame = tuple(tuple(as_expr(c, n) for c in row) for row in frame)
        if domain is None:
            domain = [[-np.inf, np.inf]] * n
        self.domain = np.asarray(domain, dtype=float)
        if self.domain.shape != (n, 2):
            raise ValueError("domain must be [[lo, hi]] per coordinate")

    # evaluation ---------------------------------------------------------
    @cached_property
    def _np_frame(self):
        cols = [[self.frame[i][mu] for i in range(self.n)] for mu in range(self.n)]
        return matrix_function(cols, self.n, "numpy")

    @cached_property
    def jax_frame(self):
        """jax-traceable ``x -> F`` with ``F[mu, i]`` as in :meth:`frame_matrix`."""
        cols = [[self.frame[i][mu] for i in range(self.n)] for mu in range(self.n)]
        return matrix_function(cols, self.n, "jax")

    @cached_property
    def jax_coframe(self):
        """jax-traceable ``x -> F^{-1}``, inverted symbolically so it stays Taylor-differentiable."""
        F = sp.Matrix([[self.frame[i][mu].expr for i in range(self.n)] for mu in range(self.n)])
        return sympy_matrix_function(F.inv(method="LU"), self.n, "jax")

    @cached_property
    def horizontal_mask(self) -> np.ndarray:
        m = np.zeros(self.n)
        m[: self.d1] = 1.0
        return m

    def in_domain(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.domain[:, 0]) and np.all(x <= self.domain[:, 1]))

    def check_domain(self, x) -> None:
        if not self.in_domain(x):
            raise DomainError(f"point {np.asarray(x).tolist()} outside chart domain of {self.name}")

    def frame_matrix(self, x) -> np.ndarray:
        self.check_domain(x)
        return self._np_frame(x)

    def frame_rank_ok(self, x, rel: float = 1e-9) -> bool:
        s = np.linalg.svd(self.frame_matrix(x), compute_uv=False)
        return bool(s[-1] > rel * s[0])

    @cached_property
    def _jit_structure(self):
        import jax

        from .connections import structure_constants_fn

        return jax.jit(structure_constants_fn(self))

    # conversions --------------------------------------------------------
    def covector_from_coordinates(self, x, xi) -> CovectorPoint:
        """Frame momenta from coordinate momenta ``xi_mu = p(d/dx_mu)``."""
        F = self.frame_matrix(x)
        return CovectorPoint(x, F.T @ np.asarray(xi, dtype=float))

    def coordinate_momenta(self, p: CovectorPoint) -> np.ndarray:
        F = self.frame_matrix(p.x)
        return np.linalg.solve(F.T, p.H)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.n,
            "horizontal_rank": self.d1,
            "frame": [[str(c) for c in row] for row in self.frame],
            "domain": [[_jsonable(lo), _jsonable(hi)] for lo, hi in self.domain],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SubRiemannianModel":
        n = int(data["dim"])
        frame = [[ScalarExpr.parse(str(c), n) for c in row] for row in data["frame"]]
        if len(frame) != n:
            raise ValueError("frame must contain dim vector fields")
        dom = data.get("domain")
        if dom is not None:
            dom = [[_from_json(lo), _from_json(hi)] for lo, hi in dom]
        return cls(data.get("name", "model"), frame, int(data["horizontal_rank"]), dom)

    @classmethod
    def from_json(cls, path) -> "SubRiemannianModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self):
        return f"SubRiemannianModel({self.name!r}, n={self.n}, d1={self.d1})"


def _jsonable(v):
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _from_json(v):
    return float(v)


def sharp(model: SubRiemannianModel, p: CovectorPoint) -> np.ndarray:
    """Frame components of the horizontal vector dual to ``p``."""
    model.check_domain(p.x)
    return p.H * model.horizontal_mask


def hamiltonian(model: SubRiemannianModel, p: CovectorPoint) -> float:
    h = p.H[: model.d1]
    return 0.5 * float(h @ h)


def structure_constants(model: SubRiemannianModel, x) -> np.ndarray:
    """``c[k, i, j]`` with ``[X_i, X_j] = sum_k c[k, i, j] X_k``."""
    model.check_domain(x)
    F = model.frame_matrix(x)
    s = np.linalg.svd(F, compute_uv=False)
    if not s[-1] > 1e-12 * s[0]:
        raise FrameDegeneracyError(f"frame of {model.name} is singular at {np.asarray(x).tolist()}")
    import jax.numpy as jnp

    return np.asarray(model._jit_structure(jnp.asarray(x, dtype=float)))
