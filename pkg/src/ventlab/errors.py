"""Exception types shared across the package."""


class InvalidMeshError(Exception):
    """Mesh violates a structural invariant (orientation, manifoldness, ...)."""


class UnsupportedFormatError(Exception):
    """Mesh file is in a format or version this reader does not handle."""


class MalformedFileError(Exception):
    """Mesh file is syntactically broken; message carries the line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedDegreeError(ValueError):
    """Polynomial or quadrature degree outside the implemented range."""


class FactorizationError(Exception):
    """Incomplete Cholesky broke down and shifting did not recover."""


class SolverStalledError(Exception):
    """Iterative linear solver hit its iteration cap before the tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotConvergedError(Exception):
    """Eigensolver ran out of iterations; partial results are attached."""

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class DegenerateBasisError(Exception):
    """Eigenspace basis has a numerically singular Gram matrix."""


class StudyError(Exception):
    """A convergence study failed at some level; partial report attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
