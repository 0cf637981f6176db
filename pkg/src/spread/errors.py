"""Exception hierarchy shared by all modules."""


class SpreadError(Exception):
    """Base class for every error raised by this package."""


class ModelValidationError(SpreadError):
    """A spread model or distribution violates its structural invariants."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PatternError(SpreadError):
    """Invalid pattern access (missing node, insufficient depth, bad window)."""


class MissingNodeError(PatternError):
    pass


class InsufficientDepthError(PatternError):
    pass


class WindowRangeError(PatternError):
    pass


class CoverageError(SpreadError):
    """A block code is not defined on a pattern or symbol it was asked to map."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ResourceLimitError(SpreadError):
    """A node or population cap was exceeded."""

    def __init__(self, message, cap=None, reached=None):
        super().__init__(message)
        self.cap = cap
        self.reached = reached


class SpectralStructureError(SpreadError):
    """The matrix is reducible, so a positive Perron vector is not guaranteed."""

    def __init__(self, message, components=()):
        super().__init__(message)
        self.components = [list(c) for c in components]


class ConvergenceError(SpreadError):
    """Power iteration did not reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class RegimeError(SpreadError):
    """Branching process is not supercritical (rho <= 1)."""


class EstimationError(SpreadError):
    """Monte Carlo estimate impossible, e.g. every trial went extinct."""


class ModelFormatError(SpreadError):
    """A model file could not be parsed; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column
