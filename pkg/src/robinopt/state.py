"""State solvers: linear Robin, Dirichlet, mixed, boundary-source and logistic.

All solvers return P1 nodal fields.  The Dirichlet solver also recovers the
outward normal flux per boundary edge from the variationally consistent
boundary residual, which is the discretely exact flux for the explicit
compliance-minimizer verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import (
    BoundaryField,
    ScalarField,
    SparseMatrix,
    as_boundary_values,
    as_nodal_values,
    boundary_load_vector,
    boundary_mass,
    csr_from_coo,
    domain_mass,
    load_vector,
    solve_spd,
    stiffness,
    weighted_domain_mass,
)
from .errors import (
    AdmissibilityError,
    IndefiniteMatrixError,
    NonConvergenceError,
    TrivialBranchError,
)
from .mesh import Mesh

MASS_EPS = 1e-14


@dataclass
class LogisticData:
    """Resource density and Newton controls for the logistic steady state."""

    m: object = 1.0
    newton_tol: float = 1e-11
    max_newton: int = 50
    max_damping: int = 30
    floor_factor: float = 1e-6


def robin_operator(mesh: Mesh, beta) -> SparseMatrix:
    """K + M_b(beta); the SPD operator of the linear Robin problem."""
    return stiffness(mesh).add(boundary_mass(mesh, beta))


def solve_robin(mesh: Mesh, beta, f, tol: float = 1e-10, strict: bool = True,
                check_box: bool = True) -> ScalarField:
    """Solve -Lap u = f with du/dn + beta u = 0 on the boundary."""
    b = as_boundary_values(mesh, beta)
    if check_box and (b.min() < -MASS_EPS or b.max() > 1.0 + MASS_EPS):
        raise AdmissibilityError("beta must take values in [0, 1]")
    if float(mesh.edge_lengths @ np.maximum(b, 0.0)) <= MASS_EPS:
        raise AdmissibilityError(
            "beta has zero boundary mass; the Robin system is singular"
        )
    A = robin_operator(mesh, b)
    F = load_vector(mesh, f, strict=strict)
    return ScalarField(mesh, solve_spd(A, F, tol=tol))


def _submatrix(A: SparseMatrix, idx: np.ndarray) -> SparseMatrix:
    sub = A.to_scipy()[idx][:, idx].tocoo()
    return csr_from_coo(idx.size, sub.row, sub.col, sub.data)


def solve_dirichlet(mesh: Mesh, f, tol: float = 1e-10, strict: bool = True):
    """Homogeneous Dirichlet solve; returns (field, outward normal flux per edge).

    The flux is recovered from the boundary rows of K v - F, split evenly
    between the two incident edges of each boundary vertex and divided by the
    edge length.
    """
    K = stiffness(mesh)
    F = load_vector(mesh, f, strict=strict)
    free = np.flatnonzero(~mesh.is_boundary)
    v = np.zeros(mesh.n_vertices)
    if free.size:
        Kii = _submatrix(K, free)
        v[free] = solve_spd(Kii, F[free], tol=tol)
    resid = K @ v - F
    flux = (resid[mesh.edges[:, 0]] + resid[mesh.edges[:, 1]]) / (
        2.0 * mesh.edge_lengths
    )
    return ScalarField(mesh, v), BoundaryField(mesh, flux)


def solve_mixed(mesh: Mesh, gamma_edges, f, tol: float = 1e-10,
                strict: bool = True) -> ScalarField:
    """Mixed problem: u = 0 on vertices incident to Gamma, Neumann elsewhere."""
    gamma = np.asarray(gamma_edges)
    if gamma.dtype == bool:
        gamma = np.flatnonzero(gamma)
    gamma = np.unique(gamma.astype(np.int64))
    if gamma.size == 0:
        raise AdmissibilityError("Gamma must contain at least one boundary edge")
    if gamma.min() < 0 or gamma.max() >= mesh.n_edges:
        raise ValueError("Gamma edge index out of range")
    dirichlet = np.unique(mesh.edges[gamma].ravel())
    mask = np.ones(mesh.n_vertices, dtype=bool)
    mask[dirichlet] = False
    free = np.flatnonzero(mask)
    K = stiffness(mesh)
    F = load_vector(mesh, f, strict=strict)
    v = np.zeros(mesh.n_vertices)
    if free.size:
        v[free] = solve_spd(_submatrix(K, free), F[free], tol=tol)
    return ScalarField(mesh, v)


def solve_robin_boundary_source(mesh: Mesh, beta, g, tol: float = 1e-10) -> ScalarField:
    """Solve -Lap z = 0 with dz/dn + beta z = g (g edgewise constant)."""
    b = as_boundary_values(mesh, beta)
    if float(mesh.edge_lengths @ np.maximum(b, 0.0)) <= MASS_EPS:
        raise AdmissibilityError(
            "beta has zero boundary mass; the Robin system is singular"
        )
    A = robin_operator(mesh, b)
    rhs = boundary_load_vector(mesh, g)
    return ScalarField(mesh, solve_spd(A, rhs, tol=tol))


def logistic_residual(mesh: Mesh, A: SparseMatrix, y: np.ndarray, m: np.ndarray):
    """Residual A y - F(y) with F(y)_i = integral of y (m - y) phi_i.

    The nonlinear term integrates the product of P1 interpolants exactly, so
    the Newton Jacobian A - M_{m-2y} is the symmetric weighted mass that also
    serves the adjoint and stability operators.
    """
    return A @ y - weighted_domain_mass(mesh, m - y) @ y


def logistic_jacobian(mesh: Mesh, A: SparseMatrix, y: np.ndarray, m: np.ndarray):
    return A - weighted_domain_mass(mesh, m - 2.0 * y)


def _solve_linearized(op: SparseMatrix, rhs: np.ndarray, tol: float) -> np.ndarray:
    try:
        return solve_spd(op, rhs, tol=tol)
    except IndefiniteMatrixError:
        if op.n <= 4000:
            return scipy.linalg.solve(op.toarray(), rhs, assume_a="sym")
        raise


def solve_logistic(mesh: Mesh, beta, data: LogisticData, tol: float = 1e-10,
                   y0=None) -> ScalarField:
    """Damped Newton solve of -Lap y = y (m - y) with Robin boundary conditions.

    The initial iterate is the nodal resource clipped below at a small
    positive floor; damping halves the step on residual increase.
    """
    b = as_boundary_values(mesh, beta)
    m = as_nodal_values(mesh, data.m)
    total_m = float(lumped_sum(mesh, m))
    v0 = float(mesh.edge_lengths @ b)
    if not total_m > v0:
        raise AdmissibilityError(
            f"total resource mass {total_m:.6g} must exceed the boundary mass "
            f"{v0:.6g} of beta"
        )
    A = robin_operator(mesh, b)
    floor = data.floor_factor * float(m.max())
    if floor <= 0.0:
        raise AdmissibilityError("resource density m must be positive somewhere")
    y = np.maximum(m, floor) if y0 is None else np.asarray(y0, float).copy()
    res = logistic_residual(mesh, A, y, m)
    rnorm = float(np.linalg.norm(res))
    for _ in range(data.max_newton):
        if rnorm <= data.newton_tol:
            break
        J = logistic_jacobian(mesh, A, y, m)
        d = _solve_linearized(J, -res, tol)
        lam = 1.0
        for _ in range(data.max_damping + 1):
            y_new = y + lam * d
            res_new = logistic_residual(mesh, A, y_new, m)
            rnorm_new = float(np.linalg.norm(res_new))
            if rnorm_new < rnorm:
                break
            lam *= 0.5
        else:
            raise NonConvergenceError(
                "Newton damping failed to reduce the residual",
                residual=rnorm,
            )
        y, res, rnorm = y_new, res_new, rnorm_new
    else:
        raise NonConvergenceError(
            f"Newton did not converge in {data.max_newton} iterations",
            residual=rnorm,
            iterations=data.max_newton,
        )
    if float(y.max()) <= 0.0 or float(lumped_sum(mesh, y)) <= 10.0 * floor:
        raise TrivialBranchError("Newton converged to the nonpositive trivial branch")
    return ScalarField(mesh, y)


def lumped_sum(mesh: Mesh, w: np.ndarray) -> float:
    """Integral of the P1 interpolant of w over the domain."""
    from .assembly import lumped_domain_weights

    return float(lumped_domain_weights(mesh) @ w)


def stability_eigenvalue(mesh: Mesh, beta, y: ScalarField, data: LogisticData,
                         tol: float = 1e-10, max_iter: int = 200) -> float:
    """Smallest eigenvalue of (K - M_W + M_b(beta)) x = mu M x, W = m - 2y.

    Inverse-power iteration on the pencil; a dense generalized eigensolve is
    used when the operator is not positive definite (possible only when the
    stability hypothesis fails).
    """
    b = as_boundary_values(mesh, beta)
    m = as_nodal_values(mesh, data.m)
    yv = y.values if isinstance(y, ScalarField) else np.asarray(y, float)
    P = logistic_jacobian(mesh, robin_operator(mesh, b), yv, m)
    M = domain_mass(mesh)
    try:
        x = np.ones(mesh.n_vertices)
        x /= np.sqrt(float(x @ (M @ x)))
        mu_prev = float(x @ (P @ x))
        for _ in range(max_iter):
            w = solve_spd(P, M @ x, tol=tol)
            w /= np.sqrt(float(w @ (M @ w)))
            mu = float(w @ (P @ w))
            x = w
            if abs(mu - mu_prev) <= 1e-10 * max(1.0, abs(mu)):
                return mu
            mu_prev = mu
        raise NonConvergenceError("inverse power iteration did not converge")
    except IndefiniteMatrixError:
        if mesh.n_vertices > 4000:
            raise
        vals = scipy.linalg.eigh(
            P.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0]
        )
        return float(vals[0])
