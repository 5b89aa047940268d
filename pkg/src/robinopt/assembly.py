"""P1 finite-element assembly and SPD linear solves.

Domain integrals use exact P1 quadrature (the weighted mass matrix integrates
products of three P1 interpolants exactly).  Boundary integrals use the edge
trapezoid rule throughout: the boundary mass matrix is diagonal (lumped),
which makes the discrete switch-function calculus, the Steklov pairing and
the finite-difference derivative checks share one quadrature.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _kernels
from .errors import (
    AdmissibilityError,
    IndefiniteMatrixError,
    NonConvergenceError,
)
from .mesh import Mesh

DENSE_FALLBACK_DIM = 2000


@dataclass(frozen=True)
class SparseMatrix:
    """Symmetric sparse matrix in compressed row form."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return _kernels.csr_matvec(self.indptr, self.indices, self.data, np.asarray(x, float))

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        mask = rows == self.indices
        d = np.zeros(self.n)
        np.add.at(d, rows[mask], self.data[mask])
        return d

    def tocoo(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return rows, self.indices.copy(), self.data.copy()

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows, cols, vals = self.tocoo()
        out[rows, cols] = vals
        return out

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n, self.n)
        )

    def add(self, other: "SparseMatrix", coeff: float = 1.0) -> "SparseMatrix":
        r1, c1, v1 = self.tocoo()
        r2, c2, v2 = other.tocoo()
        return csr_from_coo(
            self.n,
            np.concatenate([r1, r2]),
            np.concatenate([c1, c2]),
            np.concatenate([v1, coeff * v2]),
        )

    def __add__(self, other):
        return self.add(other, 1.0)

    def __sub__(self, other):
        return self.add(other, -1.0)

    def symmetry_error(self) -> float:
        a = self.to_scipy()
        d = abs(a - a.T)
        scale = max(abs(self.data).max(), 1e-300)
        return float(d.max() / scale) if d.nnz else 0.0


def csr_from_coo(n, rows, cols, vals) -> SparseMatrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        new = np.empty(rows.size, dtype=bool)
        new[0] = True
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return SparseMatrix(n=n, indptr=indptr, indices=cols, data=vals)


@dataclass
class ScalarField:
    """P1 nodal values on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("field size does not match vertex count")


@dataclass
class BoundaryField:
    """Piecewise-constant values on boundary edges."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_edges,):
            raise ValueError("boundary field size does not match edge count")

    def mass(self) -> float:
        return float(self.mesh.edge_lengths @ self.values)


def as_boundary_values(mesh: Mesh, beta) -> np.ndarray:
    if isinstance(beta, BoundaryField):
        if beta.mesh is not mesh:
            raise ValueError("boundary field belongs to a different mesh")
        return beta.values
    vals = np.asarray(beta, dtype=float)
    if vals.ndim == 0:
        return np.full(mesh.n_edges, float(vals))
    if vals.shape != (mesh.n_edges,):
        raise AdmissibilityError("beta size does not match boundary edge count")
    return vals


def as_nodal_values(mesh: Mesh, f) -> np.ndarray:
    """Evaluate a source (constant, callable or array) at the vertices."""
    if isinstance(f, ScalarField):
        if f.mesh is not mesh:
            raise ValueError("field belongs to a different mesh")
        return f.values
    if callable(f):
        return np.asarray(
            f(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float
        ) * np.ones(mesh.n_vertices)
    vals = np.asarray(f, dtype=float)
    if vals.ndim == 0:
        return np.full(mesh.n_vertices, float(vals))
    if vals.shape != (mesh.n_vertices,):
        raise ValueError("nodal source size does not match vertex count")
    return vals


# Per-mesh operator cache; meshes are immutable so this is safe.
_cache: "weakref.WeakKeyDictionary[Mesh, dict]" = weakref.WeakKeyDictionary()


def _mesh_cache(mesh: Mesh) -> dict:
    entry = _cache.get(mesh)
    if entry is None:
        entry = {}
        _cache[mesh] = entry
    return entry


def _p1_gradients(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    # grad(lambda_i) = rot90(p_{i+2} - p_{i+1}) / (2 A), rot90(x, y) = (-y, x)
    g = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        g[:, i, 0] = -e[:, 1]
        g[:, i, 1] = e[:, 0]
    g /= (2.0 * mesh.triangle_areas)[:, None, None]
    return g


def stiffness(mesh: Mesh) -> SparseMatrix:
    """K with K_ij = integral of grad(phi_i) . grad(phi_j)."""
    cache = _mesh_cache(mesh)
    if "stiffness" not in cache:
        g = _p1_gradients(mesh)
        local = np.einsum("tid,tjd->tij", g, g) * mesh.triangle_areas[:, None, None]
        rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
        cols = np.tile(mesh.triangles, (1, 3)).ravel()
        cache["stiffness"] = csr_from_coo(mesh.n_vertices, rows, cols, local.ravel())
    return cache["stiffness"]


# integral over T of lambda_i lambda_j lambda_k = area * C3[i, j, k]
_C3 = np.full((3, 3, 3), 1.0 / 60.0)
for _i in range(3):
    _C3[_i, _i, _i] = 1.0 / 10.0
    for _j in range(3):
        if _i != _j:
            _C3[_i, _i, _j] = _C3[_i, _j, _i] = _C3[_j, _i, _i] = 1.0 / 30.0


def weighted_domain_mass(mesh: Mesh, w) -> SparseMatrix:
    """M_w with (M_w)_ij = integral of w phi_i phi_j, w the P1 interpolant."""
    wv = as_nodal_values(mesh, w)
    wt = wv[mesh.triangles]
    local = np.einsum("ijk,tk->tij", _C3, wt) * mesh.triangle_areas[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    return csr_from_coo(mesh.n_vertices, rows, cols, local.ravel())


def domain_mass(mesh: Mesh) -> SparseMatrix:
    """M with M_ij = integral of phi_i phi_j (exact for P1)."""
    cache = _mesh_cache(mesh)
    if "mass" not in cache:
        cache["mass"] = weighted_domain_mass(mesh, 1.0)
    return cache["mass"]


def lumped_domain_weights(mesh: Mesh) -> np.ndarray:
    """Row sums of the mass matrix: m_i = integral of phi_i."""
    cache = _mesh_cache(mesh)
    if "lumped_domain" not in cache:
        w = domain_mass(mesh) @ np.ones(mesh.n_vertices)
        w.setflags(write=False)
        cache["lumped_domain"] = w
    return cache["lumped_domain"]


def boundary_vertex_weights(mesh: Mesh) -> np.ndarray:
    """Trapezoid boundary weights: D_i = sum of half-lengths of incident edges."""
    cache = _mesh_cache(mesh)
    if "boundary_weights" not in cache:
        d = np.zeros(mesh.n_vertices)
        np.add.at(d, mesh.edges[:, 0], 0.5 * mesh.edge_lengths)
        np.add.at(d, mesh.edges[:, 1], 0.5 * mesh.edge_lengths)
        d.setflags(write=False)
        cache["boundary_weights"] = d
    return cache["boundary_weights"]


def boundary_mass(mesh: Mesh, beta) -> SparseMatrix:
    """M_b(beta) with the edge trapezoid rule: diagonal, supported on the boundary.

    Each edge contributes beta_e * L_e / 2 to both endpoint diagonal entries,
    so bang-bang coefficients pair exactly with nodal traces.
    """
    b = as_boundary_values(mesh, beta)
    verts = np.concatenate([mesh.edges[:, 0], mesh.edges[:, 1]])
    vals = np.concatenate([0.5 * b * mesh.edge_lengths] * 2)
    return csr_from_coo(mesh.n_vertices, verts, verts, vals)


def boundary_load_vector(mesh: Mesh, g) -> np.ndarray:
    """b_i = integral over the boundary of g phi_i, exact for edgewise-constant g."""
    gv = as_boundary_values(mesh, g)
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.edges[:, 0], 0.5 * gv * mesh.edge_lengths)
    np.add.at(b, mesh.edges[:, 1], 0.5 * gv * mesh.edge_lengths)
    return b


def edge_to_vertex(mesh: Mesh, edge_vals) -> np.ndarray:
    """Length-weighted average of edgewise values at boundary vertices."""
    gv = as_boundary_values(mesh, edge_vals)
    num = np.zeros(mesh.n_vertices)
    np.add.at(num, mesh.edges[:, 0], 0.5 * gv * mesh.edge_lengths)
    np.add.at(num, mesh.edges[:, 1], 0.5 * gv * mesh.edge_lengths)
    d = boundary_vertex_weights(mesh)
    out = np.zeros(mesh.n_vertices)
    bv = mesh.boundary_vertices
    out[bv] = num[bv] / d[bv]
    return out


def edge_trapezoid(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Per-edge trapezoid value (average of the two endpoint values)."""
    return 0.5 * (nodal[mesh.edges[:, 0]] + nodal[mesh.edges[:, 1]])


def load_vector(mesh: Mesh, f, strict: bool = True) -> np.ndarray:
    """F = M f_nodal, with the sign hypothesis on f checked.

    In strict mode a negative or identically-zero source is rejected; otherwise
    a warning is emitted.
    """
    fv = as_nodal_values(mesh, f)
    if strict:
        if np.any(fv < 0.0):
            raise AdmissibilityError("source f must be nonnegative")
        if not np.any(fv > 0.0):
            raise AdmissibilityError("source f must not vanish identically")
    else:
        import warnings

        if np.any(fv < 0.0) or not np.any(fv > 0.0):
            warnings.warn("source f violates the sign hypothesis", stacklevel=2)
    return domain_mass(mesh) @ fv


def solve_spd(A: SparseMatrix, b, tol: float = 1e-10, maxiter=None, x0=None) -> np.ndarray:
    """Solve A x = b for SPD A by Jacobi-preconditioned CG.

    Falls back to a dense Cholesky factorization for dimensions <= 2000 when
    CG stalls.  Raises IndefiniteMatrixError on negative curvature and
    NonConvergenceError when no route converges.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError("right-hand side size mismatch")
    if not 0.0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    if not np.any(b):
        return np.zeros(A.n)
    if maxiter is None:
        maxiter = 10 * A.n
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise IndefiniteMatrixError("nonpositive diagonal entry")
    x0 = np.zeros(A.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x, iters, relres, status = _kernels.pcg(
        A.indptr, A.indices, A.data, 1.0 / diag, b, x0, tol, maxiter
    )
    if status == _kernels.PCG_CONVERGED:
        return x
    if status == _kernels.PCG_NEGATIVE_CURVATURE:
        raise IndefiniteMatrixError("negative curvature encountered in CG")
    if A.n <= DENSE_FALLBACK_DIM:
        try:
            c, low = scipy.linalg.cho_factor(A.toarray())
        except scipy.linalg.LinAlgError as exc:
            raise IndefiniteMatrixError("dense Cholesky failed") from exc
        return scipy.linalg.cho_solve((c, low), b)
    raise NonConvergenceError(
        f"CG did not converge in {iters} iterations (relative residual {relres:.3e})",
        residual=relres,
        iterations=iters,
    )
