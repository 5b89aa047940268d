import numpy as np
import pytest

import robinopt as ro
from robinopt.assembly import (
    boundary_load_vector,
    boundary_vertex_weights,
    csr_from_coo,
    edge_to_vertex,
    edge_trapezoid,
)
from robinopt.errors import AdmissibilityError, IndefiniteMatrixError


def test_stiffness_kills_constants(square8, disk_coarse):
    for m in (square8, disk_coarse):
        K = ro.stiffness(m)
        ones = np.ones(m.n_vertices)
        assert np.abs(K @ ones).max() <= 1e-12
        assert K.symmetry_error() <= 1e-12


def test_stiffness_exact_on_affine(square8):
    # u = x has unit Dirichlet energy on the unit square; P1 is exact there.
    u = square8.vertices[:, 0]
    K = ro.stiffness(square8)
    assert u @ (K @ u) == pytest.approx(1.0, abs=1e-12)


def test_stiffness_trace_positive(square8):
    K = ro.stiffness(square8)
    assert K.diagonal().sum() > 0.0


def test_mass_partition_of_unity(square16, disk_coarse):
    ones16 = np.ones(square16.n_vertices)
    M = ro.domain_mass(square16)
    assert ones16 @ (M @ ones16) == pytest.approx(1.0, abs=1e-12)
    n = 32
    Md = ro.domain_mass(disk_coarse)
    onesd = np.ones(disk_coarse.n_vertices)
    assert onesd @ (Md @ onesd) == pytest.approx(0.5 * n * np.sin(2 * np.pi / n), rel=1e-12)


def test_mass_single_triangle_diagonal():
    text = "robinmesh 1\nV 3\n0 0\n2 0\n0 3\nT 1\n0 1 2\nB 3\n0 1\n1 2\n2 0\n"
    m = ro.load_mesh(text)
    area = 3.0
    M = ro.domain_mass(m)
    assert np.allclose(M.diagonal(), area / 6.0)


def test_weighted_mass_reduces_to_mass(square8):
    Mw = ro.weighted_domain_mass(square8, np.ones(square8.n_vertices))
    M = ro.domain_mass(square8)
    assert np.abs(Mw.toarray() - M.toarray()).max() <= 1e-15


def test_weighted_mass_matches_quadrature_oracle():
    # One reference triangle, weight w = x.  Oracle: integrate
    # x * lambda_i * lambda_j over the triangle by brute-force subdivision.
    text = "robinmesh 1\nV 3\n0 0\n1 0\n0 1\nT 1\n0 1 2\nB 3\n0 1\n1 2\n2 0\n"
    m = ro.load_mesh(text)
    Mw = ro.weighted_domain_mass(m, m.vertices[:, 0]).toarray()

    # Degree-3 symmetric rule (exact for the cubic integrand x*lam_i*lam_j).
    bary = [
        (np.array([1 / 3, 1 / 3, 1 / 3]), -27 / 96),
        (np.array([0.6, 0.2, 0.2]), 25 / 96),
        (np.array([0.2, 0.6, 0.2]), 25 / 96),
        (np.array([0.2, 0.2, 0.6]), 25 / 96),
    ]
    oracle = np.zeros((3, 3))
    for lam, w in bary:
        x = lam[1]  # barycentric coordinate of vertex (1, 0) equals x
        oracle += w * x * np.outer(lam, lam)
    assert np.abs(Mw - oracle).max() <= 1e-15


def test_boundary_mass_totals(square8):
    zero = ro.boundary_mass(square8, 0.0)
    assert zero.data.size == 0 or np.abs(zero.data).max() == 0.0
    ones = np.ones(square8.n_vertices)
    Mb = ro.boundary_mass(square8, 1.0)
    assert ones @ (Mb @ ones) == pytest.approx(4.0, abs=1e-13)
    Mb3 = ro.boundary_mass(square8, 0.3)
    assert ones @ (Mb3 @ ones) == pytest.approx(0.3 * 4.0, abs=1e-13)
    # supported on boundary vertices only
    interior = ~square8.is_boundary
    assert np.abs(Mb.diagonal()[interior]).max() == 0.0


def test_boundary_weights_sum_to_perimeter(disk_coarse):
    d = boundary_vertex_weights(disk_coarse)
    assert d.sum() == pytest.approx(disk_coarse.perimeter, rel=1e-13)


def test_boundary_load_exact_for_edge_constant(square8):
    g = np.arange(square8.n_edges, dtype=float)
    b = boundary_load_vector(square8, g)
    ones = np.ones(square8.n_vertices)
    assert ones @ b == pytest.approx(float(square8.edge_lengths @ g), rel=1e-13)


def test_edge_vertex_transfers(square8):
    g = np.linspace(0.0, 1.0, square8.n_edges)
    nodal = edge_to_vertex(square8, g)
    back = edge_trapezoid(square8, nodal)
    # On a uniform boundary the two transfers compose to a smoothing; totals match.
    L = square8.edge_lengths
    assert L @ back == pytest.approx(float(L @ g), rel=1e-10)


def test_load_vector_checks(square8):
    F = ro.load_vector(square8, 1.0)
    assert F.sum() == pytest.approx(1.0, abs=1e-13)
    F2 = ro.load_vector(square8, 2.0)
    assert np.allclose(F2, 2 * F)
    with pytest.raises(AdmissibilityError):
        ro.load_vector(square8, 0.0)
    with pytest.raises(AdmissibilityError):
        ro.load_vector(square8, lambda x, y: x - 1.0)
    with pytest.warns(UserWarning):
        ro.load_vector(square8, 0.0, strict=False)


def test_solve_spd_diagonal():
    A = csr_from_coo(4, np.arange(4), np.arange(4), np.array([1.0, 2.0, 4.0, 8.0]))
    b = np.array([1.0, 1.0, 1.0, 1.0])
    x = ro.solve_spd(A, b)
    assert np.allclose(x, 1.0 / np.array([1.0, 2.0, 4.0, 8.0]))
    assert np.array_equal(ro.solve_spd(A, np.zeros(4)), np.zeros(4))


def test_solve_spd_random_system():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((50, 50))
    A_dense = B @ B.T + 50 * np.eye(50)
    rows, cols = np.nonzero(A_dense)
    A = csr_from_coo(50, rows, cols, A_dense[rows, cols])
    b = rng.standard_normal(50)
    x = ro.solve_spd(A, b, tol=1e-10)
    assert np.linalg.norm(A_dense @ x - b) <= 1e-10 * np.linalg.norm(b) * 10


def test_solve_spd_rejects_indefinite():
    A = csr_from_coo(2, [0, 1], [0, 1], [1.0, -1.0])
    with pytest.raises(IndefiniteMatrixError):
        ro.solve_spd(A, np.array([1.0, 1.0]))


def test_assembled_matrices_symmetric(disk_coarse):
    rng = np.random.default_rng(1)
    beta = rng.uniform(0, 1, disk_coarse.n_edges)
    for A in (
        ro.stiffness(disk_coarse),
        ro.domain_mass(disk_coarse),
        ro.boundary_mass(disk_coarse, beta),
        ro.weighted_domain_mass(disk_coarse, rng.standard_normal(disk_coarse.n_vertices)),
    ):
        assert A.symmetry_error() <= 1e-12


def test_coercivity_random_admissible(square8, disk_coarse):
    # Discrete uniform coercivity: smallest eigenvalue of K + M_b(beta) > 0.
    rng = np.random.default_rng(2)
    for m in (square8, disk_coarse):
        for _ in range(3):
            beta = ro.random_admissible(m, 0.3 * m.perimeter, rng)
            A = ro.stiffness(m).add(ro.boundary_mass(m, beta))
            lam0 = np.linalg.eigvalsh(A.toarray())[0]
            assert lam0 > 0.0
