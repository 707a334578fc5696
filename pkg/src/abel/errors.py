"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ABELError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(ABELError):
    """Numerical failure (solver, optimizer, bracketing)."""


class NonConvergence(NumericalError):
    """The dual Newton solver hit its iteration cap above tolerance."""


class DegenerateSecondMoment(NumericalError):
    """Outer-product sum of the estimating values is rank deficient."""


class BracketFailure(NumericalError):
    """A confidence-interval endpoint could not be bracketed."""


class OptimFailure(NumericalError):
    """No finite-likelihood point was found by the outer optimizer."""


class BootstrapDegenerate(NumericalError):
    """Too many bootstrap resamples failed."""


class InvalidBlockSpec(ABELError, ValueError):
    pass


class ShapeMismatch(ABELError, ValueError):
    pass


class InvalidTuning(ABELError, ValueError):
    pass


class UnsupportedGrouping(ABELError, ValueError):
    pass


class MissingMoments(ABELError, KeyError):
    pass


class DomainError(ABELError, ValueError):
    pass


class ConfigError(ABELError, ValueError):
    """Bad configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class DataError(ABELError):
    """Problems reading or parsing input data."""


class ParseError(DataError, ValueError):
    """A non-numeric cell; ``row`` and ``col`` are 1-based file positions."""

    def __init__(self, row: int, col: int, value: str = ""):
        super().__init__(f"non-numeric value {value!r} at row {row}, column {col}")
        self.row = row
        self.col = col
        self.value = value


class IoError(DataError, OSError):
    """An input file could not be opened or read."""
