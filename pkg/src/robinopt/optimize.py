"""Projected-gradient optimization over the admissible class, with
first-order (level-set) and second-order (perturbation) diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .admissible import (
    AdmissibleSpec,
    build_highfreq,
    build_lowmode,
    interior_edges,
    intermediate_measure,
    project,
    random_admissible,
)
from .adjoint import gradient, multiplier_estimate, second_derivative, solve_state
from .assembly import BoundaryField, as_boundary_values
from .criteria import ProblemSpec, concave_quadratic, eval_criterion
from .errors import CertificateError
from .mesh import Mesh
from .state import solve_robin, solve_robin_boundary_source
from .steklov import EigPairs, steklov_eigs

INTERIOR_EPS = 1e-3


@dataclass
class OptOptions:
    max_iter: int = 500
    step0: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    pg_tol: float = 1e-8
    step_min: float = 1e-10
    step_max: float = 1e6
    solver_tol: float = 1e-10


@dataclass
class HistoryEntry:
    iteration: int
    value: float
    pg_norm: float
    step: float


@dataclass
class OptResult:
    beta_star: BoundaryField
    history: List[HistoryEntry]
    converged: bool
    status: str
    lam: float
    value: float
    start_index: int = 0


@dataclass
class StructureReport:
    intermediate_length: float
    bangbang_fraction: float
    zero_length: float
    one_length: float
    residual: float
    lam: float
    perimeter: float


def _weighted_norm(L: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt(L @ v**2))


def projected_gradient(spec: ProblemSpec, mesh: Mesh, beta0,
                       opts: Optional[OptOptions] = None,
                       start_index: int = 0) -> OptResult:
    """Armijo projected gradient; ascends or descends according to the sense.

    The objective history is monotone along accepted steps; every iterate is
    feasible (box exact, mass to the projection tolerance).
    """
    opts = opts or OptOptions()
    adm = AdmissibleSpec.for_mesh(mesh, spec.V0)
    L = mesh.edge_lengths
    sgn = 1.0 if spec.sense == "maximize" else -1.0
    beta = project(as_boundary_values(mesh, beta0), adm)

    history: List[HistoryEntry] = []
    rep = gradient(spec, mesh, beta, tol=opts.solver_tol)
    step = opts.step0
    status = "max_iterations"
    converged = False
    warm = rep.u.values if spec.flavor == "logistic" else None
    prev_beta = None
    prev_g = None

    for it in range(opts.max_iter):
        g = -sgn * rep.phi.values  # weighted ascent direction of sgn * J
        # Spectral (Barzilai-Borwein) trial step, safeguarded by Armijo below.
        if prev_beta is not None:
            db = beta - prev_beta
            dg = g - prev_g
            denom = -float(L @ (db * dg))
            num = float(L @ (db * db))
            if denom > 1e-30 and num > 0.0:
                step = min(max(num / denom, opts.step_min), opts.step_max)
        cand = project(beta + step * g, adm)
        pg_norm = _weighted_norm(L, beta - cand)
        history.append(HistoryEntry(it, rep.value, pg_norm, step))
        if pg_norm <= opts.pg_tol:
            status = "stationary"
            converged = True
            break

        accepted = False
        s = step
        for _ in range(opts.max_backtracks + 1):
            trial = project(beta + s * g, adm)
            gap = float(L @ (g * (trial - beta)))
            u_trial = solve_state(spec, mesh, trial, tol=opts.solver_tol, y0=warm)
            val_trial = eval_criterion(spec, mesh, u_trial)
            if sgn * val_trial >= sgn * rep.value + opts.armijo * gap:
                accepted = True
                break
            s *= opts.backtrack
        if not accepted:
            status = "line_search_failure"
            break
        prev_beta, prev_g = beta, g
        beta = trial
        if spec.flavor == "logistic":
            warm = u_trial.values
        rep = gradient(spec, mesh, beta, tol=opts.solver_tol, u=u_trial)
        step = s

    return OptResult(
        beta_star=BoundaryField(mesh, beta),
        history=history,
        converged=converged,
        status=status,
        lam=rep.lam,
        value=rep.value,
        start_index=start_index,
    )


def multistart(spec: ProblemSpec, mesh: Mesh, n_starts: int = 5, seed: int = 0,
               opts: Optional[OptOptions] = None,
               include_constant: bool = True):
    """Seeded multistart; returns (best result, all results)."""
    rng = np.random.default_rng(seed)
    results = []
    betas = []
    if include_constant:
        betas.append(np.full(mesh.n_edges, spec.V0 / mesh.perimeter))
    while len(betas) < n_starts:
        betas.append(random_admissible(mesh, spec.V0, rng).values)
    for i, b0 in enumerate(betas[:n_starts]):
        results.append(projected_gradient(spec, mesh, b0, opts, start_index=i))
    sgn = 1.0 if spec.sense == "maximize" else -1.0
    best = max(results, key=lambda r: sgn * r.value)
    return best, results


def kkt_residual(spec: ProblemSpec, mesh: Mesh, beta,
                 eps: float = INTERIOR_EPS, tol: float = 1e-10) -> StructureReport:
    """Violation of the three level-set optimality conditions at beta.

    For minimization the active sets must satisfy phi = lam on interior
    edges, phi >= lam where beta = 1 and phi <= lam where beta = 0; signs
    flip for maximization.
    """
    b = as_boundary_values(mesh, beta)
    rep = gradient(spec, mesh, b, tol=tol)
    phi = rep.phi.values
    L = mesh.edge_lengths
    interior = (b > eps) & (b < 1.0 - eps)
    at_one = b >= 1.0 - eps
    at_zero = b <= eps
    sgn = -1.0 if spec.sense == "maximize" else 1.0
    if interior.any():
        lam = multiplier_estimate(mesh, b, rep.phi, eps)
    elif at_one.any() and at_zero.any():
        # Bang-bang point: the optimality system only asks for *some*
        # separating multiplier, so test the best one (cluster midpoint).
        if spec.sense == "maximize":
            lam = 0.5 * (float(phi[at_one].max()) + float(phi[at_zero].min()))
        else:
            lam = 0.5 * (float(phi[at_zero].max()) + float(phi[at_one].min()))
    else:
        lam = multiplier_estimate(mesh, b, rep.phi, eps)

    def pos_part(x):
        return float(np.max(x.clip(min=0.0))) if x.size else 0.0

    res = 0.0
    if interior.any():
        res = float(np.abs(phi[interior] - lam).max())
    res = max(res, pos_part(sgn * (phi[at_zero] - lam)))
    res = max(res, pos_part(sgn * (lam - phi[at_one])))

    perim = mesh.perimeter
    inter_len = intermediate_measure(b, eps, L)
    zero_len = float(L[at_zero].sum())
    one_len = float(L[at_one].sum())
    return StructureReport(
        intermediate_length=inter_len,
        bangbang_fraction=(zero_len + one_len) / perim,
        zero_length=zero_len,
        one_length=one_len,
        residual=res,
        lam=lam,
        perimeter=perim,
    )


@dataclass
class BangBangCertificate:
    ddot: float
    h: BoundaryField
    sigma_cutoff: float
    support_size: int


def bangbang_certificate(spec: ProblemSpec, mesh: Mesh, beta, K: int,
                         seed: int = 0, eps: float = INTERIOR_EPS,
                         eigs: Optional[EigPairs] = None,
                         tol: float = 1e-10) -> BangBangCertificate:
    """Second derivative along a high-frequency direction inside {eps<beta<1-eps}.

    A positive value at a non-bang-bang candidate of a maximization problem
    certifies that it is not optimal.
    """
    b = as_boundary_values(mesh, beta)
    bf = BoundaryField(mesh, b)
    support = interior_edges(bf, eps)
    if support.size < K + 2:
        raise CertificateError(
            f"interior set has {support.size} edges; need at least {K + 2}"
        )
    if eigs is None or eigs.count < K + 1:
        n_modes = min(K + 1, mesh.boundary_vertices.size)
        eigs = steklov_eigs(mesh, b, n_modes)
    u = solve_state(spec, mesh, b, tol=tol)
    h = build_highfreq(mesh, b, support, K, eigs, u, seed)
    dd = second_derivative(spec, mesh, b, h, tol=tol, u=u)
    sigma_cutoff = float(eigs.sigmas[K]) if eigs.count > K else float(eigs.sigmas[-1])
    return BangBangCertificate(
        ddot=dd, h=h, sigma_cutoff=sigma_cutoff, support_size=int(support.size)
    )


@dataclass
class RelaxationCertificate:
    ddot: float
    kconst: float
    lambda2: float
    c_used: float
    criterion_a: float
    h: BoundaryField


def concave_spec_for_relaxation(mesh: Mesh, beta, f, V0: float,
                                margin: float = 2.0, tol: float = 1e-10):
    """Boundary-minimization spec with the concave quadratic tuned so that
    its curvature ratio C = |j''| / j'(0) satisfies C = margin * Lambda2 * K(beta)."""
    u = solve_robin(mesh, beta, f, tol=tol, check_box=True)
    z = solve_robin_boundary_source(mesh, beta, 1.0, tol=tol)
    kconst = float(z.values.max() / u.values.min())
    lam2 = float(steklov_eigs(mesh, np.ones(mesh.n_edges), 3).sigmas[2])
    c = margin * lam2 * kconst
    spec = ProblemSpec(
        flavor="boundary",
        sense="minimize",
        V0=V0,
        f=f,
        criterion=concave_quadratic(2.0 / c),
    )
    return spec, c, kconst, lam2


def relaxation_certificate(mesh: Mesh, beta, spec_concave: ProblemSpec,
                           eigs: EigPairs, tol: float = 1e-10) -> RelaxationCertificate:
    """Second derivative along the explicit low-mode direction.

    A negative value at a bang-bang candidate of the concave minimization
    problem exhibits the relaxation phenomenon.
    """
    b = as_boundary_values(mesh, beta)
    u = solve_robin(mesh, b, spec_concave.f, tol=tol)
    z = solve_robin_boundary_source(mesh, b, 1.0, tol=tol)
    kconst = float(z.values.max() / u.values.min())
    lam2 = float(steklov_eigs(mesh, np.ones(mesh.n_edges), 3).sigmas[2])
    h = build_lowmode(mesh, b, u, eigs)
    dd = second_derivative(spec_concave, mesh, b, h, tol=tol, u=u)
    a = spec_concave.criterion.a
    return RelaxationCertificate(
        ddot=dd,
        kconst=kconst,
        lambda2=lam2,
        c_used=2.0 / a if a else float("nan"),
        criterion_a=a,
        h=h,
    )
