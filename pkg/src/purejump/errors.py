"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/RuntimeError so
callers can tell contract violations apart from numeric exhaustion.
"""


class PureJumpError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PureJumpError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class PreconditionError(PureJumpError, ValueError):
    """A documented precondition of the operation is violated."""


class ResourceError(PureJumpError, RuntimeError):
    """An iterative procedure hit its cap before certifying the result.

    The best partial result (if any) is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UsageError(PureJumpError, ValueError):
    """Bad experiment configuration (CLI layer); message names the field."""
