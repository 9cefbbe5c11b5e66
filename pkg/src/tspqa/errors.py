"""Exception types shared across the package."""


class TspqaError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(TspqaError, ValueError):
    """Raised for instances that violate basic structural requirements."""


class InstanceParseError(TspqaError, ValueError):
    """Raised when an instance or config file cannot be parsed.

    ``field`` names the offending entry so callers can point at it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class CapacityError(TspqaError):
    """Raised when a problem exceeds the size an exact method can handle."""


class PreconditionError(TspqaError, ValueError):
    """Raised when an operation's inputs violate its preconditions."""
