"""Robin-Steklov eigenpairs via Schur-complement elimination of the interior.

The pencil lives on boundary vertices: with A = K + M_b(beta) partitioned
into interior/boundary blocks, S = A_bb - A_bi A_ii^-1 A_ib and the
eigenproblem is S x = sigma D x where D holds the trapezoid boundary weights
(the boundary mass with beta = 1, lumped).  Modes are boundary-orthonormal in
the trapezoid pairing by construction and extended harmonically inside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .assembly import (
    BoundaryField,
    ScalarField,
    as_boundary_values,
    boundary_vertex_weights,
    edge_to_vertex,
)
from .errors import SolverError
from .mesh import Mesh
from .state import robin_operator


@dataclass
class EigPairs:
    """Ascending eigenvalues and harmonically extended orthonormal modes."""

    mesh: Mesh
    sigmas: np.ndarray
    modes: np.ndarray  # (count, n_vertices)
    residuals: np.ndarray

    @property
    def count(self) -> int:
        return self.sigmas.size

    def mode_values(self, k: int) -> np.ndarray:
        return self.modes[k]

    def mode(self, k: int) -> ScalarField:
        return ScalarField(self.mesh, self.modes[k].copy())


def steklov_eigs(mesh: Mesh, beta, K: int) -> EigPairs:
    """K smallest Robin-Steklov eigenpairs at the given coefficient."""
    nb = mesh.boundary_vertices.size
    if not 1 <= K <= nb:
        raise ValueError(f"K must lie in [1, {nb}] (boundary vertex count)")
    b = as_boundary_values(mesh, beta)
    A = robin_operator(mesh, b).to_scipy().tocsc()
    bnd = mesh.boundary_vertices
    interior = np.flatnonzero(~mesh.is_boundary)

    A_bb = A[bnd][:, bnd].toarray()
    if interior.size:
        A_ii = A[interior][:, interior].tocsc()
        A_ib = A[interior][:, bnd].toarray()
        try:
            lu = scipy.sparse.linalg.splu(A_ii)
        except RuntimeError as exc:  # pragma: no cover - valid meshes factor
            raise SolverError(f"interior block factorization failed: {exc}") from exc
        Y = lu.solve(A_ib)
        S = A_bb - A_ib.T @ Y
    else:
        S = A_bb
    S = 0.5 * (S + S.T)

    d = boundary_vertex_weights(mesh)[bnd]
    scale = 1.0 / np.sqrt(d)
    T = scale[:, None] * S * scale[None, :]
    T = 0.5 * (T + T.T)
    w, V = np.linalg.eigh(T)
    sigmas = w[:K]
    X = scale[:, None] * V[:, :K]

    # Deterministic sign: largest-magnitude boundary entry positive.
    for k in range(K):
        j = int(np.argmax(np.abs(X[:, k])))
        if X[j, k] < 0:
            X[:, k] = -X[:, k]

    residuals = np.linalg.norm(S @ X - (d[:, None] * X) * sigmas[None, :], axis=0)

    modes = np.zeros((K, mesh.n_vertices))
    modes[:, bnd] = X.T
    if interior.size:
        modes[:, interior] = -(lu.solve(A_ib @ X)).T
    return EigPairs(mesh=mesh, sigmas=sigmas, modes=modes, residuals=residuals)


def boundary_pairing(mesh: Mesh, g) -> np.ndarray:
    """Nodal boundary-vertex values of g for the trapezoid pairing."""
    if isinstance(g, BoundaryField):
        return edge_to_vertex(mesh, g)
    if isinstance(g, ScalarField):
        return g.values
    gv = np.asarray(g, dtype=float)
    if gv.shape == (mesh.n_edges,):
        return edge_to_vertex(mesh, gv)
    if gv.shape == (mesh.n_vertices,):
        return gv
    raise ValueError("expected edgewise or nodal values")


def expand_in_basis(eigs: EigPairs, g):
    """Trapezoid-pairing coefficients of g against the modes.

    Returns (alphas, reconstruction_residual) where the residual is the
    weighted norm of g minus its K-mode reconstruction, relative to ||g||.
    """
    mesh = eigs.mesh
    gv = boundary_pairing(mesh, g)
    d = boundary_vertex_weights(mesh)
    bv = mesh.boundary_vertices
    weights = d[bv]
    gb = gv[bv]
    phib = eigs.modes[:, bv]
    alphas = phib @ (weights * gb)
    recon = phib.T @ alphas
    gnorm = np.sqrt(float(weights @ gb**2))
    if gnorm == 0.0:
        return alphas, 0.0
    resid = np.sqrt(float(weights @ (gb - recon) ** 2)) / gnorm
    return alphas, resid
