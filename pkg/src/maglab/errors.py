"""Exception and warning types shared across the package."""


class MaglabError(Exception):
    """Base class for all maglab errors."""


class ValidationError(MaglabError, ValueError):
    """Raised when an input object violates a documented precondition."""


class NotPositiveDefinite(MaglabError):
    """A similarity matrix failed its positive-definite factorization.

    Carries the smallest pivot encountered, so callers can distinguish a
    genuinely indefinite matrix from a numerically degenerate one.
    """

    def __init__(self, message: str, min_pivot: float):
        super().__init__(message)
        self.min_pivot = min_pivot


class CapExceeded(MaglabError):
    """Exact subset enumeration was requested beyond the configured cap.

    Use an analytic fast path (box, coordinate simplex) or the Monte Carlo
    estimator instead, or raise the cap explicitly.
    """


class ConditionWarning(UserWarning):
    """A solve succeeded but the pivot ratio indicates near-singularity."""
