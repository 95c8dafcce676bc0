"""Exception hierarchy."""


class SecondLawError(Exception):
    """Base class for all errors raised by this package."""


class InvariantError(SecondLawError, ValueError):
    """A value violates the invariants of its type (Hermiticity, trace, ...)."""


class DimensionMismatchError(SecondLawError, ValueError):
    pass


class DomainError(SecondLawError, ValueError):
    """A scalar function is undefined on part of an operator's spectrum."""


class RankDeficiencyError(SecondLawError, ValueError):
    pass


class SpectralError(SecondLawError, ArithmeticError):
    """The eigensolver failed to converge."""


class DimensionGuardError(SecondLawError, ValueError):
    pass


class ScenarioError(SecondLawError, ValueError):
    """Invalid scenario document; ``field`` names the offending path."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
