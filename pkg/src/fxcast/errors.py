"""Exception hierarchy shared across the package."""


class FxcastError(Exception):
    """Base class for all package errors.

    ``exit_code`` drives the CLI: 2 for usage/config/data problems, 1 for
    runtime failures.
    """

    exit_code = 2


class ParseError(FxcastError):
    """Malformed input file. Carries the offending path and line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path else ""
        super().__init__(f"{where}{message}")


class ValidationError(FxcastError):
    """Input violates a domain invariant (duplicate dates, empty series, ...)."""


class AlignmentError(FxcastError):
    """Series cannot be aligned onto a common date grid."""


class FrequencyError(FxcastError):
    """Operation applied to a series of the wrong frequency."""


class InsufficientDataError(FxcastError):
    """Not enough rows to honour a lag or horizon request."""


class ScheduleError(FxcastError):
    """Rolling-window schedule cannot be built from the given range."""


class ConfigError(FxcastError):
    """Bad experiment configuration or manifest."""


class MetricError(FxcastError):
    """Metric undefined for the given inputs (e.g. all-zero actuals)."""

    exit_code = 1


class MethodError(FxcastError):
    """Interpretability method applied to an incompatible model."""


class SolverError(FxcastError):
    """Numerical solve failed (e.g. singular ridge system at alpha=0)."""

    exit_code = 1


class DivergenceError(FxcastError):
    """Training aborted on non-finite loss (exploding gradients)."""

    exit_code = 1
