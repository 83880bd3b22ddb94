"""Shared exception types for the simulator."""


class MemassocError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(MemassocError, ValueError):
    """An operation received input outside its documented contract."""


class InvalidStartError(MemassocError, RuntimeError):
    """An iterative routine could not be started from the supplied point."""


class ConfigError(MemassocError, ValueError):
    """An experiment config file is malformed; the message names the line."""


class DataError(MemassocError, ValueError):
    """An external data file is missing, unreadable, or malformed."""
