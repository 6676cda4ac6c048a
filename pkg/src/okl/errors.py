"""Exception types shared across the package."""


class OklError(Exception):
    """Base class for errors raised by okl."""


class DomainError(OklError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class FanRegionError(DomainError):
    """Boundary parameters violate u + v > 0 (equivalently AC < 1)."""


class CapacityError(OklError):
    """The requested size exceeds what the exact evaluator supports."""


class SingularityError(OklError):
    """A linear system that should have a one-dimensional kernel does not."""


class DivergenceError(OklError):
    """A series or truncated sum cannot converge for these parameters."""


class TruncationError(OklError):
    """An adaptive truncation failed to stabilise.

    ``estimates`` carries the last two values seen.
    """

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class UnreliableEstimateError(OklError):
    """A Monte Carlo estimate has too small an effective sample size,
    or failed a window-doubling check."""
