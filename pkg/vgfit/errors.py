"""Exception classes for vgfit failures.

Every exception carries a short ``kind`` and a CLI ``exit_code`` so the
command-line entry point can turn any failure into a one-line,
machine-parsable reason without inspecting messages.
"""


class VgfitError(Exception):
    """Base class for all vgfit errors.

    Attributes:
        message: Human-readable error description
        context: Optional key/value pairs locating the failure
            (e.g. ``line=12``, ``index=40``, ``path="fit.json"``)

    Example:
        raise DataError("price must be positive", line=12)
        # Results in: "line=12: price must be positive"
    """

    kind = "error"
    exit_code = 1

    def __init__(self, message: str, **context):
        self.message = message
        self.context = context
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        """Format error message with context prefix if provided."""
        if self.context:
            where = ", ".join(f"{key}={value}" for key, value in self.context.items())
            return f"{where}: {self.message}"
        return self.message

    def __str__(self) -> str:
        return self._format_message()


class ConfigError(VgfitError, ValueError):
    """Raised when a run configuration or CLI combination is invalid."""

    kind = "usage"
    exit_code = 1


class GridSizeError(VgfitError, ValueError):
    """Raised when a transform receives a length that is not a power of two."""

    kind = "usage"
    exit_code = 1


class KsDomainError(VgfitError, ValueError):
    """Raised when the KS null distribution is queried outside its domain."""

    kind = "usage"
    exit_code = 1


class DataError(VgfitError, ValueError):
    """Raised when price or return data cannot be ingested or filtered.

    Example:
        raise DataError("dates are not strictly increasing", line=7)
    """

    kind = "data"
    exit_code = 2


class ReportError(VgfitError):
    """Raised when a report or sample file cannot be written or read back."""

    kind = "data"
    exit_code = 2


class NumericalError(VgfitError):
    """Base class for failures of the numerical engine."""

    kind = "numerical"
    exit_code = 3


class GridContractError(NumericalError, ValueError):
    """Raised when an FrftGrid violates beta = a/n or delta = beta*gamma/(2*pi)."""


class GridSupportError(NumericalError):
    """Raised when the FRFT grid cannot support the requested computation.

    Covers characteristic functions that have not decayed at the grid edge,
    densities whose mass deviates from one, and observations outside the
    interpolation-safe span.
    """


class DiagnosticsError(NumericalError):
    """Raised when a numerical diagnostic fails (imaginary residue, non-finite sums)."""


class MomentsError(NumericalError):
    """Raised when method-of-moments initialization has no solution."""


class ModelCdfError(NumericalError):
    """Raised when a model CDF is not monotone over the sample range."""


class ConvergenceError(NumericalError):
    """Raised by the CLI when a fit ends without meeting its gradient tolerance."""


class TailDecayWarning(UserWarning):
    """Characteristic function has not decayed at the edge of the FRFT support.

    Attributes:
        magnitude: max(|cf(-a/2)|, |cf(a/2)|)
    """

    def __init__(self, magnitude: float):
        self.magnitude = magnitude
        super().__init__(
            f"characteristic function magnitude {magnitude:.3e} at the grid edge; "
            f"the density is band-limited (increase a to reduce truncation)"
        )
