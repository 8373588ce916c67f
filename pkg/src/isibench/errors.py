"""Exception types shared across the package."""


class IsibenchError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(IsibenchError):
    """An input violates a documented invariant (shape, normalization, hermiticity)."""


class CapExceededError(IsibenchError):
    """A dimension or memory cap would be exceeded; refuse instead of thrashing."""


class DegenerateSpectrumError(IsibenchError):
    """The spectrum (or gap structure) violates a nondegeneracy hypothesis.

    ``colliding`` holds index pairs of the offending levels when known.
    """

    def __init__(self, message: str, colliding=()):
        super().__init__(message)
        self.colliding = tuple(colliding)


class ConfigError(IsibenchError):
    """A config file, override, or data file header could not be parsed or validated."""
