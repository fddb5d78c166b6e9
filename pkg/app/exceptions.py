class LabError(Exception):
    """Root of every error raised by the laboratory."""


class DomainError(LabError, ValueError):
    """An operation was called outside its domain (bad site, scale, exponent, span...)."""


class InsufficientDataError(DomainError):
    """Aggregation preconditions are not met, e.g. too few system sizes for a regression."""


class ConfigError(LabError, ValueError):
    """The experiment configuration failed to parse or validate."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class BandExhaustedError(LabError, RuntimeError):
    """The adaptive height band hit its doubling cap with the minimizer still on the edge."""

    def __init__(self, message: str, doublings: int, half_width: float):
        super().__init__(message)
        self.doublings = doublings
        self.half_width = half_width


class InvariantError(LabError, ArithmeticError):
    """A deterministic identity that must hold exactly was violated."""
