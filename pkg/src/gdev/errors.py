"""Exception hierarchy shared by every module."""


class GdevError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GdevError, ValueError):
    pass


class ProcessExhaustedError(GdevError):
    """Raised when stepping a process that already contains every pair."""


class ConfigurationError(GdevError):
    pass


class ResourceLimitError(GdevError):
    """A configured enumeration or memory cap would be exceeded."""


class InfeasibleRegimeError(GdevError):
    pass


class DegenerateRateError(GdevError):
    pass


class DomainError(GdevError, ValueError):
    pass


class InternalInconsistencyError(GdevError, AssertionError):
    """An identity that holds exactly was violated; this is always a bug."""
