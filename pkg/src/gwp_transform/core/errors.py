"""Exception hierarchy for the wave packet transform."""

from typing import Any, Dict, Optional


class WavePacketError(Exception):
    """Base class for every error raised by gwp_transform."""


class NotSymmetricError(WavePacketError, ValueError):
    """Width matrix differs from its transpose beyond tolerance."""

    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"Width matrix is not symmetric (max deviation {deviation:.3e})")


class ImaginaryPartNotPositiveDefiniteError(WavePacketError, ValueError):
    """Imaginary part of a width matrix has a non-positive eigenvalue."""

    def __init__(self, eigenvalue: float):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"Imaginary part of width matrix is not positive definite (eigenvalue {eigenvalue!r})"
        )


class InvalidParameterError(WavePacketError, ValueError):
    """Parameter is non-finite or outside of its admissible range."""


class DimensionMismatchError(WavePacketError, ValueError):
    """Operands live in different dimensions."""


class EpsMismatchError(WavePacketError, ValueError):
    """Packets were built with different semiclassical parameters."""


class DimensionTooLargeError(WavePacketError, ValueError):
    """Brute-force oracle refused: dimension exceeds its cost guard."""


class IndexOutOfRangeError(WavePacketError, IndexError):
    """Multi-index outside of the grid index set."""


class InvalidGeometryError(WavePacketError, ValueError):
    """Grid spacing and box length are inconsistent."""


class NTooLargeError(WavePacketError, ValueError):
    """Requested quadrature order exceeds the supported range."""


class TooFewPointsError(WavePacketError, ValueError):
    """Not enough sweep records for a rate fit."""


class SingularDifferenceError(WavePacketError, ArithmeticError):
    """C0 - conj(C) is numerically singular."""


class NumericalFailureError(WavePacketError, ArithmeticError):
    """A pipeline stage produced a non-finite value."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        self.context = dict(context or {})
        if self.context:
            details = ", ".join(f"{key}={value}" for key, value in self.context.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ConfigError(WavePacketError, ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
