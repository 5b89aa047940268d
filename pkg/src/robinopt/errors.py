"""Exception types raised across the package."""


class RobinoptError(Exception):
    """Base class for all package errors."""


class MeshFormatError(RobinoptError):
    """Malformed mesh file or inconsistent mesh data.

    ``line`` is the 1-based line number when the error comes from parsing.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrientationError(MeshFormatError):
    """A triangle has non-positive signed area."""


class NonManifoldError(MeshFormatError):
    """A declared boundary edge is shared by two triangles (or an edge by >2)."""


class AdmissibilityError(RobinoptError):
    """Input violates the admissible-class constraints (box, mass, source sign)."""


class SolverError(RobinoptError):
    """Linear or nonlinear solver failure."""


class NonConvergenceError(SolverError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IndefiniteMatrixError(SolverError):
    """Negative curvature detected where an SPD operator was required."""


class TrivialBranchError(SolverError):
    """Nonlinear solve collapsed onto the nonpositive trivial branch."""


class CriterionWindowError(RobinoptError):
    """State left the validity window of a concave criterion (j' <= 0 reached)."""

    def __init__(self, message, max_state=None):
        super().__init__(message)
        self.max_state = max_state


class CertificateError(RobinoptError):
    """A perturbation certificate could not be constructed."""


class ConfigError(RobinoptError):
    """Scenario configuration failed validation; ``pointer`` is a JSON path."""

    def __init__(self, message, pointer=None):
        if pointer:
            message = f"{pointer}: {message}"
        super().__init__(message)
        self.pointer = pointer
