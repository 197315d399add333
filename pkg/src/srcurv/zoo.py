"""Built-in models with known Young diagrams and closed-form invariants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .expr import coordinates
from .model import CovectorPoint, SubRiemannianModel


@dataclass(frozen=True)
class ZooEntry:
    """A model bundled with its declared maximal diagram and reference invariants.

    ``invariants`` maps a label to ``(callable(p) -> float, provenance)``.
    ``connections`` lists the connection constructions that apply.
    """

    name: str
    model: SubRiemannianModel
    maximal_diagram: tuple
    invariants: dict = field(default_factory=dict)
    connections: tuple = ("nice",)
    sample_box: tuple | None = None


def _circle_functions(kappa: float, x):
    """Warp c(x) with c'' = -kappa c, c(0)=1, and its primitive S, S(0)=0."""
    if kappa > 0:
        k = sp.sqrt(sp.nsimplify(kappa))
        return sp.cos(k * x), sp.sin(k * x) / k
    if kappa < 0:
        k = sp.sqrt(sp.nsimplify(-kappa))
        return (sp.exp(k * x) + sp.exp(-k * x)) / 2, (sp.exp(k * x) - sp.exp(-k * x)) / (2 * k)
    return sp.Integer(1), x


def _half_width(kappa: float) -> float:
    return 0.8 * (np.pi / 2) / np.sqrt(kappa) if kappa > 0 else 3.0


def euclidean(n: int = 3) -> SubRiemannianModel:
    frame = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return SubRiemannianModel(f"euclidean{n}", frame, n, [[-10.0, 10.0]] * n)


def constant_curvature_surface(kappa: float = 1.0) -> SubRiemannianModel:
    """Surface ``dx^2 + c(x)^2 dy^2`` of Gaussian curvature kappa, frame (d_x, c^-1 d_y)."""
    x, y = coordinates(2)
    c, _ = _circle_functions(kappa, x)
    frame = [[1, 0], [0, 1 / c]]
    w = _half_width(kappa)
    return SubRiemannianModel(f"surface(kappa={kappa:g})", frame, 2, [[-w, w], [-10.0, 10.0]])


def heisenberg() -> SubRiemannianModel:
    x, y, z = coordinates(3)
    frame = [[1, 0, -y / 2], [0, 1, x / 2], [0, 0, 1]]
    return SubRiemannianModel("heisenberg", frame, 2, [[-20.0, 20.0]] * 3)


def contact3d(kappa: float = 1.0) -> SubRiemannianModel:
    """Contact bundle over a surface of curvature kappa.

    Base metric ``dx^2 + c(x)^2 dy^2``, contact form ``dz - S(x) dy`` with
    ``S' = c`` (so d alpha is the area form), Reeb field ``d_z``:
    ``X1 = d_x``, ``X2 = c^-1 (d_y + S d_z)``, ``X3 = d_z``.  The Reeb flow is
    an isometry (chi = 0) and the Tanno curvature equals kappa.
    """
    x, y, z = coordinates(3)
    c, S = _circle_functions(kappa, x)
    frame = [[1, 0, 0], [0, 1 / c, S / c], [0, 0, 1]]
    w = _half_width(kappa)
    return SubRiemannianModel(f"contact3d(kappa={kappa:g})", frame, 2, [[-w, w], [-20.0, 20.0], [-20.0, 20.0]])


def se2() -> SubRiemannianModel:
    """Left-invariant contact structure on the roto-translation group.

    ``X1 = cos t d_x + sin t d_y``, ``X2 = d_t``, Reeb ``X3 = sin t d_x - cos t d_y``;
    the Reeb flow is not an isometry, so the torsion tau is nonzero.
    """
    x, y, t = coordinates(3)
    frame = [[sp.cos(t), sp.sin(t), 0], [0, 0, 1], [sp.sin(t), -sp.cos(t), 0]]
    return SubRiemannianModel("se2", frame, 2, [[-20.0, 20.0]] * 3)


def martinet() -> SubRiemannianModel:
    x, y, z = coordinates(3)
    frame = [[1, 0, 0], [0, 1, x ** 2], [0, 0, 1]]
    return SubRiemannianModel("martinet", frame, 2, [[-5.0, 5.0], [-20.0, 20.0], [-20.0, 20.0]])


def quaternion_matrices(n: int = 1) -> list:
    """Matrices of left multiplication by i, j, k on H^n = R^{4n} (block diagonal)."""
    Li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    Lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
    Lk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
    return [np.kron(np.eye(n), L) for L in (Li, Lj, Lk)]


def quaternionic_heisenberg(n: int = 1) -> SubRiemannianModel:
    """Quaternionic Heisenberg group in exponential coordinates.

    Lie bracket ``[X_i, X_j] = sum_k <J_k X_i, X_j> Z_k``; left-invariant frame
    ``X_i = d_{x_i} - 1/2 sum_{j,k} c^k_ij x_j d_{z_k}``, ``Z_k = d_{z_k}``.
    """
    d1 = 4 * n
    dim = d1 + 3
    xs = coordinates(dim)
    J = quaternion_matrices(n)
    c = np.zeros((3, d1, d1))
    for k in range(3):
        c[k] = J[k].T  # c[k, i, j] = <J_k X_i, X_j> = J_k[j, i]
    frame = []
    for i in range(d1):
        row = [1 if m == i else 0 for m in range(d1)]
        for k in range(3):
            row.append(sum(-sp.Rational(1, 2) * int(c[k, i, j]) * xs[j] for j in range(d1) if c[k, i, j] != 0))
        frame.append(row)
    for k in range(3):
        frame.append([0] * d1 + [1 if m == k else 0 for m in range(3)])
    return SubRiemannianModel(f"quaternionic_heisenberg({n})", frame, d1, [[-20.0, 20.0]] * dim)


# ---------------------------------------------------------------------------
# closed-form invariants (unit horizontal part r = |sharp p|, vertical momenta)


def _r(p: CovectorPoint, d1: int) -> float:
    return float(np.linalg.norm(p.H[:d1]))


def _contact_invariants(kappa: float) -> dict:
    def ric11(p):
        return kappa * _r(p, 2) ** 2 + p.H[2] ** 2

    return {
        "Ric(1,1)": (ric11, "r^2 kappa + H_Z^2 (3D contact, chi = 0)"),
        "Ric(1,2)": (lambda p: 0.0, "vanishes for constant kappa and chi = 0"),
        "Ric(2,1)": (lambda p: 0.0, "final box spanned by the velocity"),
    }


def _htype_invariants(d1: int, d2: int = 3) -> dict:
    """Ricci invariants of an H-type group (flat: both curvature terms vanish).

    The first-row values are the sums of the term-by-term expansion of the
    H-type computation; the summarized closed forms ``(11 d2 + 7)/8 h^2`` and
    ``-(45/256) h^4`` printed next to it do not equal those sums.
    """

    def hz2(p):
        return float(p.H[d1:] @ p.H[d1:])

    def ric21(p):
        return 0.5 * (d1 - d2 - 1) * 0.5 * hz2(p)

    def ric11(p):
        return (11 * d2 - 3) / 8 * hz2(p)

    def ric12(p):
        return -45.0 / 256.0 * (d2 - 1) * hz2(p) ** 2

    return {
        "Ric(2,1)": (ric21, "H-type group, flat: (d1 - d2 - 1)/4 h^2"),
        "Ric(1,1)": (ric11, "H-type group, flat: d2/4 - 1/4 + 1 + 9 (d2 - 1)/8 = (11 d2 - 3)/8, times h^2"),
        "Ric(1,2)": (ric12, "H-type group, flat: (1/4)(9/16 - 81/64)(d2 - 1) h^4 = -(45/256)(d2 - 1) h^4"),
    }


def registry() -> dict:
    """All zoo entries by name."""
    entries = [
        ZooEntry("euclidean", euclidean(3), (3,), {"Ric(1,1)": (lambda p: 0.0, "flat")}, ("nice", "group")),
        ZooEntry("surface", constant_curvature_surface(1.0), (2,),
                 {"Ric(1,1)": (lambda p: float(p.H[:2] @ p.H[:2]), "kappa |p|^2, kappa = 1")}, ("nice",)),
        ZooEntry("heisenberg", heisenberg(), (2, 1), _contact_invariants(0.0), ("nice", "group")),
        ZooEntry("contact3d", contact3d(1.0), (2, 1), _contact_invariants(1.0), ("nice",)),
        ZooEntry("sphere", contact3d(1.0), (2, 1), _contact_invariants(1.0), ("nice",)),
        ZooEntry("martinet", martinet(), (2, 1), {}, ("nice", "group")),
        ZooEntry("se2", se2(), (2, 1), {}, ("nice", "group")),
        ZooEntry("quaternionic_heisenberg", quaternionic_heisenberg(2), (8, 3), _htype_invariants(8), ("nice", "group")),
        ZooEntry("quaternionic_heisenberg1", quaternionic_heisenberg(1), (4, 3), _htype_invariants(4), ("nice", "group")),
    ]
    return {e.name: e for e in entries}


def get(name: str) -> ZooEntry:
    reg = registry()
    if name not in reg:
        raise KeyError(f"unknown zoo model {name!r}; available: {', '.join(sorted(reg))}")
    return reg[name]
