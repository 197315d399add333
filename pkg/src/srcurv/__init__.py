"""Canonical curvature of sub-Riemannian geodesics from compatible connections."""

import jax

jax.config.update("jax_enable_x64", True)

from .expr import ScalarExpr  # noqa: E402
from .model import CovectorPoint, SubRiemannianModel, hamiltonian, sharp, structure_constants  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ScalarExpr",
    "CovectorPoint",
    "SubRiemannianModel",
    "hamiltonian",
    "sharp",
    "structure_constants",
]
