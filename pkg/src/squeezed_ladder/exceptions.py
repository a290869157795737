"""Custom exception hierarchy for simulation, parsing and fitting errors."""

from __future__ import annotations


class SqueezedLadderError(Exception):
    """Base exception for squeezed-ladder errors.

    Attributes:
        message: Human-readable error message
        line: 1-based line in a sequence file, when the error has a source position
        column: 1-based column in a sequence file
        detail: Extra numeric context (tail mass, condition number, residual, ...)
    """

    def __init__(
        self,
        message: str,
        line: int | None = None,
        column: int | None = None,
        detail: dict[str, float] | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.detail = detail or {}

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.column is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, column {self.column}: {self.message}"

    def __repr__(self) -> str:
        parts = []
        if self.line is not None:
            parts.append(f"line={self.line}")
        if self.column is not None:
            parts.append(f"column={self.column}")
        for key, value in self.detail.items():
            parts.append(f"{key}={value:.3g}")
        suffix = f", {', '.join(parts)}" if parts else ""
        return f"{self.__class__.__name__}({self.message!r}{suffix})"


class InputError(SqueezedLadderError):
    """Invalid input: bad parameters, malformed files, inconsistent objects."""

    pass


class NumericalError(SqueezedLadderError):
    """The computation itself failed or cannot be trusted."""

    pass


# Input errors (CLI exit code 2)
class ValidationError(InputError):
    """Parameters outside their validity range, or a schedule that breaks a rule."""

    pass


class ParseError(InputError):
    """Sequence-file syntax error."""

    pass


class RatioError(ValidationError):
    """Bichromatic drive with Omega_b >= Omega_r has no normalizable squeezed basis."""

    pass


class DimensionMismatchError(InputError):
    """Operators or states built against different Fock-space truncations."""

    pass


class ModeError(InputError):
    """Schedule directive that the chosen execution mode cannot carry out."""

    pass


# Numerical errors (CLI exit code 3)
class TruncationError(NumericalError):
    """Too much weight of a state lies beyond the retained Fock levels."""

    pass


class IntegrationError(NumericalError):
    """Master-equation integration failed or lost positivity."""

    pass


class FitError(NumericalError):
    """Least-squares fit did not converge or has nothing to fit."""

    pass


class IllConditionedError(NumericalError):
    """Population inversion cannot separate neighboring sideband frequencies."""

    pass


class AliasWarning(UserWarning):
    """Fitted frequency sits close to the Nyquist limit of the sampling grid."""

    pass
