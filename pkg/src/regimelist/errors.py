"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: ValidationError and its subclasses
exit with 2, everything else derived from RegimeListError exits with 3.
"""


class RegimeListError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RegimeListError):
    """Malformed input: schema violations, out-of-range values, bad files."""


class InvalidPredicateError(ValidationError):
    """Predicate incompatible with the characteristic it tests."""


class ConvergenceError(RegimeListError):
    """Iterative fit did not reach tolerance within the iteration budget."""

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class SingularSystemError(RegimeListError):
    """Normal equations are singular and no ridge penalty was requested."""


class SizeLimitError(RegimeListError):
    """Instance exceeds a configured safety limit for exact computation."""


class EmptyCandidateSetError(RegimeListError):
    """Pattern mining produced no candidates (support threshold too high)."""
