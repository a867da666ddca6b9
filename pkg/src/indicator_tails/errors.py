"""Exception hierarchy shared by all modules."""


class TailBoundError(ValueError):
    """Base class for every error raised by this package."""


class DomainError(TailBoundError):
    """An argument lies outside the domain where a formula is defined."""


class PreconditionError(TailBoundError):
    """A stated precondition of a bound or construction does not hold."""


class SideMismatchError(PreconditionError):
    """A one-sided bound was requested for the opposite tail."""


class UnsupportedSpecError(PreconditionError):
    """The spec lacks a quantity the bound needs (usually ``n``)."""


class NonConvexError(TailBoundError):
    """A log-MGF evaluator failed the numerical convexity check."""


class SearchExhaustedError(TailBoundError):
    """A constructive search ran out of budget before finding a witness."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = list(log or [])
