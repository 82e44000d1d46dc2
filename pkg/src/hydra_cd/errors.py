"""Exception hierarchy for hydra-cd.

Every error raised by the library derives from :class:`HydraError` and also
from the builtin it refines, so callers may catch either.
"""

from typing import Optional, Sequence


class HydraError(Exception):
    """Base class for all hydra-cd errors."""


class MatrixFormatError(HydraError, ValueError):
    """Malformed Matrix Market / vector / partition file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateEntryError(MatrixFormatError):
    """The same (row, column) pair appears twice."""


class ZeroEntryError(MatrixFormatError):
    """An explicitly stored zero value."""


class PartitionError(HydraError, ValueError):
    """Invalid or unbalanced coordinate partition."""


class DimensionError(HydraError, ValueError):
    """Vector or matrix dimensions do not agree."""


class ZeroColumnError(HydraError, ValueError):
    """Active coordinate with an all-zero column (M_ii = 0)."""

    def __init__(self, columns: Sequence[int]):
        self.columns = list(columns)
        shown = ", ".join(str(c) for c in self.columns[:10])
        more = "" if len(self.columns) <= 10 else f" (+{len(self.columns) - 10} more)"
        super().__init__(f"zero column(s) for active coordinate(s): {shown}{more}")


class NonFiniteError(HydraError, ValueError):
    """A nonfinite input or update."""

    def __init__(self, message: str, coordinate: Optional[int] = None):
        self.coordinate = coordinate
        if coordinate is not None:
            message = f"{message} (coordinate {coordinate})"
        super().__init__(message)


class ConfigError(HydraError, ValueError):
    """Invalid configuration value."""


class SigmaNotConvergedError(HydraError, RuntimeError):
    """Power iteration for sigma hit its iteration cap."""

    def __init__(self, estimate: float, iterations: int):
        self.estimate = estimate
        self.iterations = iterations
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last estimate {estimate:.6g})"
        )


class DenseLimitError(HydraError, ValueError):
    """Dense eigen oracle requested above its size limit."""


class SingularBlockError(HydraError, RuntimeError):
    """Block diagonal B^Q is not positive definite."""


class DivergenceError(HydraError, RuntimeError):
    """Loss grew beyond the divergence guard."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


class CertificateError(HydraError, RuntimeError):
    """Generated instance failed its optimality certificate."""


class ProtocolError(HydraError, RuntimeError):
    """Node work or message exchange failed in threaded execution."""
