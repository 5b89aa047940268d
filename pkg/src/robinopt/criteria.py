"""Cost integrands and evaluation of the three functional families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import (
    ScalarField,
    boundary_mass,
    boundary_vertex_weights,
    load_vector,
    lumped_domain_weights,
    stiffness,
)
from .errors import CriterionWindowError
from .mesh import Mesh
from .state import LogisticData

FLAVORS = ("boundary", "distributed", "compliance", "logistic")
SENSES = ("maximize", "minimize")


@dataclass(frozen=True)
class CriterionJ:
    """Integrand j with derivatives on the nonnegative half-line.

    Kinds: ``identity`` (j(u) = u), ``power`` (j(u) = u**gamma, gamma > 0,
    gamma != 1) and ``concave_quadratic`` (j(u) = -u^2/2 + (a/2) u, increasing
    only while u < a/2; the window is checked at evaluation).
    """

    kind: str
    gamma: float = 0.0
    a: float = 0.0

    def j(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return u
        if self.kind == "power":
            return u**self.gamma
        return -0.5 * u**2 + 0.5 * self.a * u

    def dj(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return np.ones_like(u)
        if self.kind == "power":
            return self.gamma * u ** (self.gamma - 1.0)
        return 0.5 * self.a - u

    def d2j(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return np.zeros_like(u)
        if self.kind == "power":
            return self.gamma * (self.gamma - 1.0) * u ** (self.gamma - 2.0)
        return -np.ones_like(u)

    @property
    def window_max(self) -> Optional[float]:
        """Upper end of the validity window (where j' > 0), if finite."""
        return 0.5 * self.a if self.kind == "concave_quadratic" else None


def identity() -> CriterionJ:
    return CriterionJ(kind="identity")


def power(gamma: float) -> CriterionJ:
    if gamma <= 0.0 or gamma == 1.0:
        raise ValueError("power criterion requires gamma > 0, gamma != 1")
    return CriterionJ(kind="power", gamma=float(gamma))


def concave_quadratic(a: float) -> CriterionJ:
    if a <= 0.0:
        raise ValueError("concave quadratic requires a > 0")
    return CriterionJ(kind="concave_quadratic", a=float(a))


@dataclass
class ProblemSpec:
    """One optimization problem: flavor, sense, integrand, source and mass."""

    flavor: str
    sense: str
    V0: float
    f: object = 1.0
    criterion: CriterionJ = field(default_factory=identity)
    logistic: Optional[LogisticData] = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}")
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")
        if self.V0 <= 0.0:
            raise ValueError("V0 must be positive")
        if self.flavor == "logistic" and self.logistic is None:
            self.logistic = LogisticData()

    def check_feasible(self, mesh: Mesh):
        if not self.V0 < mesh.perimeter:
            raise ValueError("V0 must be smaller than the perimeter")


def _check_window(criterion: CriterionJ, umax: float):
    wmax = criterion.window_max
    if wmax is not None and umax >= wmax:
        raise CriterionWindowError(
            f"state max {umax:.6g} reaches the criterion validity window "
            f"(j' <= 0 for u >= {wmax:.6g})",
            max_state=umax,
        )


def eval_criterion(spec: ProblemSpec, mesh: Mesh, u: ScalarField) -> float:
    """Evaluate the criterion on a state from the matching solve.

    Boundary: edge-trapezoid quadrature of j(u) on the boundary.
    Distributed/logistic: lumped-weight quadrature 1^T M j(u).
    Compliance: f^T M u.
    """
    uv = u.values if isinstance(u, ScalarField) else np.asarray(u, float)
    if spec.flavor == "compliance":
        return float(load_vector(mesh, spec.f, strict=False) @ uv)
    if spec.flavor == "boundary":
        bv = mesh.boundary_vertices
        _check_window(spec.criterion, float(uv[bv].max()))
        d = boundary_vertex_weights(mesh)
        return float(d[bv] @ spec.criterion.j(uv[bv]))
    _check_window(spec.criterion, float(uv.max()))
    return float(lumped_domain_weights(mesh) @ spec.criterion.j(uv))


def compliance_energy_identity(mesh: Mesh, beta, f, tol: float = 1e-10):
    """Return (compliance, -2 x minimal energy) for comparison.

    The two agree at solver tolerance for the discrete solution.
    """
    from .state import solve_robin

    u = solve_robin(mesh, beta, f, tol=tol)
    uv = u.values
    K = stiffness(mesh)
    Mb = boundary_mass(mesh, beta)
    F = load_vector(mesh, f, strict=False)
    lhs = float(F @ uv)
    energy = 0.5 * float(uv @ (K @ uv)) + 0.5 * float(uv @ (Mb @ uv)) - float(F @ uv)
    return lhs, -2.0 * energy
