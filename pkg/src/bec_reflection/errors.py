"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ResourceLimitError(RuntimeError):
    """A requested table or grid exceeds the configured size cap."""


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration hit ``max_iter`` before reaching ``tol``.

    The last iterate and its residual are kept on the exception so callers
    can inspect or resume from them.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class DegenerateSolutionError(RuntimeError):
    """The line-width iteration collapsed onto the trivial Gamma == 0 branch."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class PropagationError(RuntimeError):
    """The time stepper produced NaNs or an unphysical norm increase."""
