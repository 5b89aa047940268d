import numpy as np
import pytest
import scipy.linalg

import robinopt as ro
from robinopt.errors import AdmissibilityError
from robinopt.state import robin_operator


def dirichlet_square_center_series(terms=400):
    # Independent spectral-series oracle for -Lap v = 1, v = 0 on the unit square.
    total = 0.0
    for mm in range(1, terms, 2):
        for nn in range(1, terms, 2):
            total += (
                np.sin(mm * np.pi / 2)
                * np.sin(nn * np.pi / 2)
                / (mm * nn * (mm * mm + nn * nn))
            )
    return 16.0 / np.pi**4 * total


def test_robin_radial_oracle(disk_fine):
    # u(r) = (1 - r^2)/4 + 1/(2 beta) for f = 1, beta constant on the unit disk.
    u = ro.solve_robin(disk_fine, 1.0, 1.0)
    assert u.values[0] == pytest.approx(0.75, abs=2e-3)
    bv = disk_fine.boundary_vertices
    assert np.abs(u.values[bv] - 0.5).max() <= 2e-3
    u2 = ro.solve_robin(disk_fine, 0.5, 1.0)
    assert np.abs(u2.values[bv] - 1.0).max() <= 3e-3


def test_robin_linear_in_f(square8):
    rng = np.random.default_rng(0)
    beta = ro.random_admissible(square8, 1.5, rng)
    u1 = ro.solve_robin(square8, beta, 1.0)
    u2 = ro.solve_robin(square8, beta, 2.0)
    assert np.abs(u2.values - 2.0 * u1.values).max() <= 1e-9
    f = lambda x, y: 1.0 + x
    ua = ro.solve_robin(square8, beta, f)
    ub = ro.solve_robin(square8, beta, lambda x, y: 2.0 + x)
    combo = ua.values + u1.values  # (1 + x) + 1 = 2 + x by linearity
    assert np.abs(ub.values - combo).max() <= 1e-9


def test_robin_positivity_random(square8, disk_coarse):
    rng = np.random.default_rng(1)
    for m in (square8, disk_coarse):
        for _ in range(5):
            beta = ro.random_admissible(m, 0.4 * m.perimeter, rng)
            u = ro.solve_robin(m, beta, 1.0)
            assert u.values.min() > 0.0


def test_robin_rejects_zero_mass(square8):
    with pytest.raises(AdmissibilityError):
        ro.solve_robin(square8, 0.0, 1.0)


def test_robin_bounded_under_sampling(square8, square16):
    # Discrete analogue of the uniform state bound: the max over sampled
    # admissible coefficients is stable under refinement.
    sups = []
    for m in (square8, square16):
        rng = np.random.default_rng(7)
        vals = [
            ro.solve_robin(m, ro.random_admissible(m, 0.3 * m.perimeter, rng), 1.0
                           ).values.max()
            for _ in range(10)
        ]
        sups.append(max(vals))
    assert abs(sups[1] - sups[0]) <= 0.2 * sups[0]


def test_dirichlet_disk_oracle(disk_medium):
    v, flux = ro.solve_dirichlet(disk_medium, 1.0)
    assert v.values[0] == pytest.approx(0.25, abs=2e-3)
    assert np.abs(flux.values + 0.5).max() <= 2e-3
    assert (flux.values < 0).all()  # Hopf sign


def test_dirichlet_square_series_oracle():
    m = ro.generate_square(24)
    v, flux = ro.solve_dirichlet(m, 1.0)
    center = v.values[12 * 25 + 12]
    assert center == pytest.approx(dirichlet_square_center_series(), abs=2e-4)
    assert (flux.values < 0).all()
    # total flux equals the total load exactly (discrete balance)
    assert m.edge_lengths @ flux.values == pytest.approx(-1.0, abs=1e-12)


def test_dirichlet_zero_source_nonstrict(square8):
    v, flux = ro.solve_dirichlet(square8, 0.0, strict=False)
    assert np.abs(v.values).max() == 0.0


def test_mixed_full_gamma_is_dirichlet(square8):
    vmix = ro.solve_mixed(square8, np.arange(square8.n_edges), 1.0)
    vdir, _ = ro.solve_dirichlet(square8, 1.0)
    assert np.abs(vmix.values - vdir.values).max() <= 1e-12


def test_mixed_empty_gamma_rejected(square8):
    with pytest.raises(AdmissibilityError):
        ro.solve_mixed(square8, [], 1.0)


def test_mixed_max_away_from_gamma():
    # Gamma = bottom side; the maximum should sit on the top side.
    m = ro.generate_square(12)
    v = ro.solve_mixed(m, np.arange(12), 1.0)
    top = m.vertices[:, 1] == 1.0
    assert v.values.max() == pytest.approx(v.values[top].max(), rel=1e-12)


def test_mixed_mirror_symmetry():
    # The cell diagonals make the triangulation invariant under (x, y) -> (y, x),
    # so Gamma = bottom and Gamma = left give exactly transposed solutions.
    m = ro.generate_square(10)
    # CCW edge ordering: bottom 0..9, right 10..19, top 20..29, left 30..39.
    v_bottom = ro.solve_mixed(m, np.arange(0, 10), 1.0)
    v_left = ro.solve_mixed(m, np.arange(30, 40), 1.0)
    idx = np.arange(m.n_vertices)
    i, j = idx % 11, idx // 11
    transposed = i * 11 + j
    assert np.abs(v_bottom.values - v_left.values[transposed]).max() <= 1e-10


def test_boundary_source_constant_solution(disk_medium):
    z = ro.solve_robin_boundary_source(disk_medium, 1.0, 1.0)
    assert np.abs(z.values - 1.0).max() <= 1e-9  # z = 1 exactly, any domain
    z3 = ro.solve_robin_boundary_source(disk_medium, 1.0, 3.0)
    assert np.abs(z3.values - 3.0 * z.values).max() <= 1e-8


def test_boundary_source_indicator_positive(square8):
    # Strong maximum principle; oracle: independent dense solve.
    g = np.zeros(square8.n_edges)
    g[5] = 1.0
    beta = np.full(square8.n_edges, 0.5)
    z = ro.solve_robin_boundary_source(square8, beta, g)
    assert z.values.min() > 0.0
    A = robin_operator(square8, beta).toarray()
    rhs = ro.assembly.boundary_load_vector(square8, g)
    dense = np.linalg.solve(A, rhs)
    assert np.abs(dense - z.values).max() <= 1e-9


def test_logistic_bounds_and_stability(disk_coarse):
    data = ro.LogisticData(m=1.0)
    beta = ro.project_field(disk_coarse, np.full(disk_coarse.n_edges, 0.25),
                            0.25 * disk_coarse.perimeter)
    y = ro.solve_logistic(disk_coarse, beta, data)
    assert 0.0 < y.values.min()
    assert y.values.max() < 1.0  # y <= sup m with strict inequality inside
    mu = ro.stability_eigenvalue(disk_coarse, beta, y, data)
    assert mu > 0.0


def test_logistic_neumann_limit(disk_coarse):
    # As the boundary mass vanishes the state approaches the constant m.
    data = ro.LogisticData(m=1.0)
    beta = ro.project_field(disk_coarse, np.full(disk_coarse.n_edges, 1e-3),
                            1e-3 * disk_coarse.perimeter)
    y = ro.solve_logistic(disk_coarse, beta, data)
    assert np.abs(y.values - 1.0).max() <= 0.05


def test_logistic_mass_condition(square8):
    # Total resource must exceed the boundary mass of beta.
    data = ro.LogisticData(m=0.2)  # integral of m = 0.2 < V0 = 0.8
    beta = ro.project_field(square8, np.full(square8.n_edges, 0.2), 0.8)
    with pytest.raises(AdmissibilityError):
        ro.solve_logistic(square8, beta, data)


def test_logistic_self_convergence():
    # Doubling the resolution changes the total population at second order.
    data = ro.LogisticData(m=1.0)
    totals = []
    for nb, nr in ((16, 4), (32, 8), (64, 16)):
        m = ro.generate_disk(nb, nr)
        beta = ro.project_field(m, np.full(m.n_edges, 0.25), 0.25 * m.perimeter)
        y = ro.solve_logistic(m, beta, data)
        totals.append(ro.lumped_domain_weights(m) @ y.values)
    d1 = abs(totals[1] - totals[0])
    d2 = abs(totals[2] - totals[1])
    assert d2 <= 0.4 * d1


def test_stability_smoke_not_steady(disk_coarse):
    data = ro.LogisticData(m=1.0)
    beta = ro.project_field(disk_coarse, np.full(disk_coarse.n_edges, 0.25),
                            0.25 * disk_coarse.perimeter)
    y = ro.solve_logistic(disk_coarse, beta, data)
    half = ro.ScalarField(disk_coarse, 0.5 * y.values)
    mu = ro.stability_eigenvalue(disk_coarse, beta, half, data)
    assert np.isfinite(mu)


def test_stability_matches_dense_oracle(disk_coarse):
    # W = 0 at y = m/2: the pencil reduces to (K + M_b, M).
    data = ro.LogisticData(m=1.0)
    rng = np.random.default_rng(3)
    beta = ro.random_admissible(disk_coarse, 0.3 * disk_coarse.perimeter, rng)
    y0 = ro.ScalarField(disk_coarse, np.full(disk_coarse.n_vertices, 0.5))
    mu = ro.stability_eigenvalue(disk_coarse, beta, y0, data)
    A = robin_operator(disk_coarse, beta.values).toarray()
    M = ro.domain_mass(disk_coarse).toarray()
    oracle = scipy.linalg.eigh(A, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    assert mu == pytest.approx(oracle, rel=1e-8)
