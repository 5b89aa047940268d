"""Penalized-Robin to mixed-problem convergence as the penalty grows.

For a boundary subset Gamma the Robin solve with coefficient alpha on Gamma
and 0 elsewhere approaches the mixed Neumann-Dirichlet solution; the sweep
records errors, the Gamma-trace and the energy along an ascending alpha list.
The box constraint of the admissible class deliberately does not apply here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .assembly import (
    ScalarField,
    boundary_mass,
    domain_mass,
    load_vector,
    solve_spd,
    stiffness,
)
from .errors import AdmissibilityError
from .mesh import Mesh
from .state import solve_mixed


@dataclass
class AlphaRecord:
    alpha: float
    l2_error: float
    h1_error: float
    trace_sq: float
    energy: float


@dataclass
class AlphaSweepResult:
    records: List[AlphaRecord]
    v_norm: float
    mixed_energy: float
    trace_tol_reference: float
    v: ScalarField


def alpha_sweep(mesh: Mesh, gamma_edges, f, alphas, tol: float = 1e-10) -> AlphaSweepResult:
    """Solve the penalized problems and compare with the mixed solution.

    The energy (1/2)|grad u|^2 + (alpha/2) trace^2 - int f u is nondecreasing
    in alpha and bounded above by the mixed-problem energy.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    if any(b > a for a, b in zip(alphas[1:], alphas[:-1])):
        raise ValueError("alphas must be ascending")
    gamma = np.asarray(gamma_edges)
    if gamma.dtype == bool:
        gamma = np.flatnonzero(gamma)
    gamma = np.unique(gamma.astype(np.int64))
    if gamma.size == 0:
        raise AdmissibilityError("Gamma must contain at least one boundary edge")

    K = stiffness(mesh)
    M = domain_mass(mesh)
    F = load_vector(mesh, f)
    v = solve_mixed(mesh, gamma, f, tol=tol)
    vv = v.values
    v_norm = float(np.sqrt(vv @ (M @ vv)))
    mixed_energy = 0.5 * float(vv @ (K @ vv)) - float(F @ vv)

    indicator = np.zeros(mesh.n_edges)
    indicator[gamma] = 1.0
    gl = mesh.edge_lengths[gamma]
    gi, gj = mesh.edges[gamma, 0], mesh.edges[gamma, 1]

    records = []
    for a in alphas:
        A = K.add(boundary_mass(mesh, a * indicator))
        u = solve_spd(A, F, tol=tol)
        diff = u - vv
        l2 = float(np.sqrt(diff @ (M @ diff)))
        h1 = float(np.sqrt(max(diff @ (K @ diff), 0.0)))
        trace_sq = float(gl @ (0.5 * (u[gi] ** 2 + u[gj] ** 2)))
        energy = 0.5 * float(u @ (K @ u)) + 0.5 * a * trace_sq - float(F @ u)
        records.append(AlphaRecord(a, l2, h1, trace_sq, energy))

    return AlphaSweepResult(
        records=records,
        v_norm=v_norm,
        mixed_energy=mixed_energy,
        trace_tol_reference=records[0].trace_sq,
        v=v,
    )
