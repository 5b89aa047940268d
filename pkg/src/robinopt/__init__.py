"""robinopt: optimize Robin boundary coefficients of elliptic PDEs.

A P1 finite-element toolkit for the admissible class of [0, 1]-valued
boundary coefficients with fixed boundary integral: state and adjoint
solvers, boundary gradients, Robin-Steklov spectra, projected-gradient
optimization and structure certificates, plus a scenario-driven CLI.
"""

from ._kernels import BACKEND, HAS_NUMBA
from .admissible import (
    AdmissibleSpec,
    build_highfreq,
    build_lowmode,
    intermediate_measure,
    project,
    project_field,
    random_admissible,
    random_direction,
)
from .adjoint import (
    GradientReport,
    adjoint_state,
    directional_derivative,
    gradient,
    second_derivative,
    sensitivity,
    solve_state,
)
from .alpha_limit import AlphaSweepResult, alpha_sweep
from .assembly import (
    BoundaryField,
    ScalarField,
    SparseMatrix,
    boundary_mass,
    boundary_vertex_weights,
    domain_mass,
    load_vector,
    lumped_domain_weights,
    solve_spd,
    stiffness,
    weighted_domain_mass,
)
from .criteria import (
    CriterionJ,
    ProblemSpec,
    compliance_energy_identity,
    concave_quadratic,
    eval_criterion,
    identity,
    power,
)
from .errors import (
    AdmissibilityError,
    CertificateError,
    ConfigError,
    CriterionWindowError,
    IndefiniteMatrixError,
    MeshFormatError,
    NonConvergenceError,
    NonManifoldError,
    OrientationError,
    RobinoptError,
    SolverError,
    TrivialBranchError,
)
from .mesh import Mesh, from_arrays, generate_disk, generate_square, load_mesh
from .optimize import (
    BangBangCertificate,
    OptOptions,
    OptResult,
    RelaxationCertificate,
    StructureReport,
    bangbang_certificate,
    concave_spec_for_relaxation,
    kkt_residual,
    multistart,
    projected_gradient,
    relaxation_certificate,
)
from .state import (
    LogisticData,
    solve_dirichlet,
    solve_logistic,
    solve_mixed,
    solve_robin,
    solve_robin_boundary_source,
    stability_eigenvalue,
)
from .steklov import EigPairs, expand_in_basis, steklov_eigs

__version__ = "0.1.0"
