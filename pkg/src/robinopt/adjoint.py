"""Adjoint states, boundary gradients, sensitivities and second derivatives.

Everything here is the exact derivative calculus of the *discrete* criteria
(discretize-then-optimize): boundary pairings use the edge trapezoid rule and
domain pairings the lumped/exact P1 quadratures of the assembly module, so
finite differences of the discrete criterion reproduce these formulas to
truncation order.

For every flavor the first derivative in a direction h is
``-sum_e L_e h_e phi_e`` where phi is the edgewise switch function
(trapezoid of u*p, or of u^2 for the self-adjoint compliance case).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    BoundaryField,
    ScalarField,
    SparseMatrix,
    as_boundary_values,
    as_nodal_values,
    boundary_vertex_weights,
    edge_trapezoid,
    lumped_domain_weights,
    solve_spd,
    weighted_domain_mass,
)
from .criteria import ProblemSpec, eval_criterion
from .errors import IndefiniteMatrixError, RobinoptError
from .mesh import Mesh
from .state import (
    logistic_jacobian,
    robin_operator,
    solve_logistic,
    solve_robin,
)

INTERIOR_EPS = 1e-3


@dataclass
class GradientReport:
    """Switch function, criterion value and multiplier estimate at one beta."""

    phi: BoundaryField
    value: float
    lam: float
    u: ScalarField
    p: ScalarField


def solve_state(spec: ProblemSpec, mesh: Mesh, beta, tol: float = 1e-10,
                y0=None) -> ScalarField:
    """State equation of the flavor: linear Robin or logistic."""
    if spec.flavor == "logistic":
        return solve_logistic(mesh, beta, spec.logistic, tol=tol, y0=y0)
    return solve_robin(mesh, beta, spec.f, tol=tol)


def linearized_operator(spec: ProblemSpec, mesh: Mesh, beta,
                        u: ScalarField) -> SparseMatrix:
    """Operator of the sensitivity/adjoint equations at the given state."""
    A = robin_operator(mesh, as_boundary_values(mesh, beta))
    if spec.flavor == "logistic":
        m = as_nodal_values(mesh, spec.logistic.m)
        return logistic_jacobian(mesh, A, u.values, m)
    return A


def adjoint_state(spec: ProblemSpec, mesh: Mesh, beta, u: ScalarField,
                  tol: float = 1e-10) -> ScalarField:
    """Adjoint of the criterion at the state u.

    compliance: p = u (self-adjoint).  boundary: Robin solve with boundary
    data j'(u).  distributed: Robin solve with domain data j'(u).  logistic:
    same domain data against the linearized operator, solvable because the
    linearization is positive definite at a stable state.
    """
    if spec.flavor == "compliance":
        return ScalarField(mesh, u.values.copy())
    op = linearized_operator(spec, mesh, beta, u)
    if spec.flavor == "boundary":
        d = boundary_vertex_weights(mesh)
        rhs = np.zeros(mesh.n_vertices)
        bv = mesh.boundary_vertices
        rhs[bv] = d[bv] * spec.criterion.dj(u.values[bv])
    else:
        rhs = lumped_domain_weights(mesh) * spec.criterion.dj(u.values)
    try:
        return ScalarField(mesh, solve_spd(op, rhs, tol=tol))
    except IndefiniteMatrixError as exc:
        if spec.flavor == "logistic":
            raise RobinoptError(
                "linearized logistic operator is indefinite: the stability "
                "hypothesis fails at this state"
            ) from exc
        raise


def switch_function(spec: ProblemSpec, mesh: Mesh, u: ScalarField,
                    p: ScalarField) -> BoundaryField:
    return BoundaryField(mesh, edge_trapezoid(mesh, u.values * p.values))


def multiplier_estimate(mesh: Mesh, beta, phi: BoundaryField,
                        eps: float = INTERIOR_EPS) -> float:
    """Length-weighted mean of phi over strictly interior edges (or all)."""
    b = as_boundary_values(mesh, beta)
    L = mesh.edge_lengths
    mask = (b > eps) & (b < 1.0 - eps)
    if not mask.any():
        mask = np.ones(mesh.n_edges, dtype=bool)
    return float(L[mask] @ phi.values[mask] / L[mask].sum())


def gradient(spec: ProblemSpec, mesh: Mesh, beta, tol: float = 1e-10,
             u: ScalarField = None) -> GradientReport:
    """Criterion value and switch function phi; dJ[h] = -sum_e L_e h_e phi_e."""
    if u is None:
        u = solve_state(spec, mesh, beta, tol=tol)
    p = adjoint_state(spec, mesh, beta, u, tol=tol)
    phi = switch_function(spec, mesh, u, p)
    value = eval_criterion(spec, mesh, u)
    lam = multiplier_estimate(mesh, beta, phi)
    return GradientReport(phi=phi, value=value, lam=lam, u=u, p=p)


def directional_derivative(mesh: Mesh, phi: BoundaryField, h) -> float:
    hv = as_boundary_values(mesh, h)
    return -float(mesh.edge_lengths @ (hv * phi.values))


def _boundary_pair_rhs(mesh: Mesh, h, nodal: np.ndarray) -> np.ndarray:
    """b_i = -sum_{e owns i} (L_e/2) h_e nodal_i, the trapezoid pairing."""
    hv = as_boundary_values(mesh, h)
    rhs = np.zeros(mesh.n_vertices)
    np.add.at(rhs, mesh.edges[:, 0], 0.5 * hv * mesh.edge_lengths)
    np.add.at(rhs, mesh.edges[:, 1], 0.5 * hv * mesh.edge_lengths)
    return -rhs * nodal


def sensitivity(spec: ProblemSpec, mesh: Mesh, beta, u: ScalarField, h,
                tol: float = 1e-10) -> ScalarField:
    """Derivative of the state in direction h (boundary data -h u)."""
    op = linearized_operator(spec, mesh, beta, u)
    rhs = _boundary_pair_rhs(mesh, h, u.values)
    return ScalarField(mesh, solve_spd(op, rhs, tol=tol))


def second_derivative(spec: ProblemSpec, mesh: Mesh, beta, h,
                      tol: float = 1e-10, u: ScalarField = None,
                      p: ScalarField = None) -> float:
    """Second directional derivative of the criterion along h.

    The leading term is -2 * trapezoid pairing of h against udot*p; the
    curvature terms add the j'' quadrature (boundary or domain) and, for the
    logistic flavor, the exact cubic term from the second state derivative.
    """
    if u is None:
        u = solve_state(spec, mesh, beta, tol=tol)
    if p is None:
        p = adjoint_state(spec, mesh, beta, u, tol=tol)
    udot = sensitivity(spec, mesh, beta, u, h, tol=tol)
    hv = as_boundary_values(mesh, h)
    lead = -2.0 * float(
        mesh.edge_lengths
        @ (hv * edge_trapezoid(mesh, udot.values * p.values))
    )
    if spec.flavor == "compliance":
        return lead
    if spec.flavor == "boundary":
        d = boundary_vertex_weights(mesh)
        bv = mesh.boundary_vertices
        curv = float(
            d[bv] @ (spec.criterion.d2j(u.values[bv]) * udot.values[bv] ** 2)
        )
        return lead + curv
    m = lumped_domain_weights(mesh)
    curv = float(m @ (spec.criterion.d2j(u.values) * udot.values**2))
    if spec.flavor == "logistic":
        # d2g/dy2 = -2 for the logistic nonlinearity, integrated exactly
        # against the P1 interpolants of p and ydot.
        M_ydot = weighted_domain_mass(mesh, udot.values)
        curv += -2.0 * float(p.values @ (M_ydot @ udot.values))
    return lead + curv
