"""The constraint set {0 <= beta <= 1, sum L_e beta_e = V0} and perturbations.

Projection is the length-weighted Euclidean projection onto the capped
simplex, computed with a scalar shift found by bisection.  Perturbation
builders produce mass-neutral directions: seeded high-frequency directions
orthogonal to low Steklov moments, and the explicit low-mode combination used
by the relaxation mechanism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import BoundaryField, ScalarField, as_boundary_values, edge_trapezoid
from .errors import AdmissibilityError, CertificateError
from .mesh import Mesh

MASS_TOL = 1e-12


@dataclass(frozen=True)
class AdmissibleSpec:
    """Target boundary mass and edge weights of the admissible class."""

    V0: float
    lengths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=float))
        if np.any(self.lengths <= 0.0):
            raise AdmissibilityError("edge weights must be positive")
        if not 0.0 < self.V0 < float(self.lengths.sum()):
            raise AdmissibilityError(
                f"V0 must lie strictly between 0 and the perimeter "
                f"{float(self.lengths.sum()):.6g}, got {self.V0:.6g}"
            )

    @classmethod
    def for_mesh(cls, mesh: Mesh, V0: float) -> "AdmissibleSpec":
        return cls(V0=float(V0), lengths=mesh.edge_lengths)


def project(g, spec: AdmissibleSpec, return_tau: bool = False):
    """Weighted projection: beta_e = clamp(g_e - tau, 0, 1), tau by bisection.

    tau -> sum L_e clamp(g_e - tau, 0, 1) is nonincreasing; bisection runs to
    absolute mass tolerance 1e-12.
    """
    gv = np.asarray(g.values if isinstance(g, BoundaryField) else g, dtype=float)
    L = spec.lengths
    if gv.shape != L.shape:
        raise AdmissibilityError("projection input size does not match edge count")

    def mass(tau):
        return float(L @ np.clip(gv - tau, 0.0, 1.0))

    lo, hi = float(gv.min()) - 1.0, float(gv.max())
    # mass(lo) >= V0 >= mass(hi) = 0 by construction of the bracket
    if mass(lo) < spec.V0:
        raise AdmissibilityError("V0 is infeasible for the given bounds")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) >= spec.V0:
            lo = mid
        else:
            hi = mid
        if abs(mass(0.5 * (lo + hi)) - spec.V0) <= MASS_TOL and hi - lo <= 1e-13 * max(
            1.0, abs(hi)
        ):
            break
    tau = 0.5 * (lo + hi)
    beta = np.clip(gv - tau, 0.0, 1.0)
    return (beta, tau) if return_tau else beta


def project_field(mesh: Mesh, g, V0: float) -> BoundaryField:
    spec = AdmissibleSpec.for_mesh(mesh, V0)
    return BoundaryField(mesh, project(as_boundary_values(mesh, g), spec))


def random_admissible(mesh: Mesh, V0: float, rng, low: float = 0.0,
                      high: float = 1.0) -> BoundaryField:
    """Seeded random feasible coefficient: project a uniform draw."""
    g = rng.uniform(low, high, size=mesh.n_edges)
    return project_field(mesh, g, V0)


def random_direction(mesh: Mesh, rng) -> BoundaryField:
    """Seeded random mass-neutral direction with unit weighted norm."""
    L = mesh.edge_lengths
    h = rng.standard_normal(mesh.n_edges)
    h -= float(L @ h) / float(L.sum())
    h /= np.sqrt(float(L @ h**2))
    return BoundaryField(mesh, h)


def intermediate_measure(beta, eps: float, lengths=None) -> float:
    """Total length of edges with eps < beta < 1 - eps."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    if isinstance(beta, BoundaryField):
        vals, L = beta.values, beta.mesh.edge_lengths
    else:
        vals = np.asarray(beta, dtype=float)
        L = np.asarray(lengths, dtype=float)
    mask = (vals > eps) & (vals < 1.0 - eps)
    return float(L[mask].sum())


def interior_edges(beta: BoundaryField, eps: float = 1e-3) -> np.ndarray:
    vals = beta.values
    return np.flatnonzero((vals > eps) & (vals < 1.0 - eps))


def build_highfreq(mesh: Mesh, beta, support, K: int, eigs, u: ScalarField,
                   seed: int) -> BoundaryField:
    """Seeded direction on ``support`` with zero mass and K vanishing moments.

    The moment functionals pair h against the edge-trapezoid values of
    u * phi_k for the first K Steklov modes; the result has unit weighted norm.
    """
    support = np.asarray(support, dtype=np.int64)
    if support.size < K + 2:
        raise CertificateError(
            f"support has {support.size} edges; need at least {K + 2} "
            f"for {K} moment conditions plus mass neutrality"
        )
    if eigs.count < K:
        raise CertificateError(f"{K} modes requested but only {eigs.count} available")
    L = mesh.edge_lengths[support]
    uv = u.values
    constraints = [np.ones(support.size)]
    for k in range(K):
        phi = eigs.mode_values(k)
        constraints.append(edge_trapezoid(mesh, uv * phi)[support])

    rng = np.random.default_rng(seed)
    h = rng.standard_normal(support.size)
    # Gram-Schmidt in the L-weighted inner product against the constraints.
    basis = []
    for c in constraints:
        v = c.copy()
        for b in basis:
            v -= float(L @ (v * b)) * b
        nrm = np.sqrt(float(L @ v**2))
        if nrm > 1e-13:
            basis.append(v / nrm)
    for b in basis:
        h -= float(L @ (h * b)) * b
    nrm = np.sqrt(float(L @ h**2))
    if nrm <= 1e-10:
        raise CertificateError("constraints exhaust the support; enlarge it")
    full = np.zeros(mesh.n_edges)
    full[support] = h / nrm
    return BoundaryField(mesh, full)


def build_lowmode(mesh: Mesh, beta, u: ScalarField, eigs) -> BoundaryField:
    """Mass-neutral combination of the first two nonconstant Steklov modes over u."""
    if eigs.count < 3:
        raise CertificateError("low-mode direction needs at least three modes")
    uv = u.values
    L = mesh.edge_lengths
    phi1_over_u = edge_trapezoid(mesh, eigs.mode_values(1) / np.where(uv == 0, 1.0, uv))
    phi2_over_u = edge_trapezoid(mesh, eigs.mode_values(2) / np.where(uv == 0, 1.0, uv))
    a1 = float(L @ phi2_over_u)
    a2 = -float(L @ phi1_over_u)
    h = a1 * phi1_over_u + a2 * phi2_over_u
    if float(np.abs(h).max()) <= 1e-14:
        raise CertificateError(
            "degenerate low-mode direction (both moments vanish by symmetry)"
        )
    return BoundaryField(mesh, h)
