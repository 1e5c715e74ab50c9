"""Exception hierarchy; every class carries the CLI exit code it maps to."""


class DrRootsError(Exception):
    exit_code = 1


class ParseError(DrRootsError):
    """Malformed polynomial or complex literal."""

    exit_code = 3


class SolverError(DrRootsError):
    exit_code = 4


class IllConditioned(SolverError):
    """Critical-point residual stayed above tolerance after all refinement rounds."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DerivativeZero(SolverError):
    """Newton update undefined: the derivative (or reciprocal sum) vanished."""


class LevelIncomplete(SolverError):
    """A cascade level kept missing roots after retries and cluster attribution."""

    def __init__(self, message, level=None, found=None, expected=None):
        super().__init__(message)
        self.level = level
        self.found = found
        self.expected = expected


class ResidualBoundExceeded(SolverError):
    """A returned root misses the residual bound on the input polynomial."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class BadRoot(SolverError):
    """Deflation remainder above the residual bound."""

    def __init__(self, message, remainder=None):
        super().__init__(message)
        self.remainder = remainder


class ReportError(DrRootsError):
    exit_code = 5


class ReportSchemaError(ReportError):
    """Report document missing its schema version or failing validation."""
