"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: malformed prior, mismatched shapes, out-of-range parameter."""


class SolverError(RuntimeError):
    """An iterative routine (AMP or a convex solver) failed numerically."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
