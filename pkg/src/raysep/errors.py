"""Exception types. ``category`` is what the CLI reports on failure."""


class RaysepError(Exception):
    category = "internal"
    exit_code = 1


class ValidationError(RaysepError, ValueError):
    """Inputs violate a documented invariant."""

    category = "validation"
    exit_code = 5


class ConfigError(RaysepError, ValueError):
    category = "config"
    exit_code = 3


class FormatError(RaysepError, ValueError):
    """A binary file is malformed (bad magic, truncated, size mismatch...)."""

    category = "format"
    exit_code = 4


class StorageError(RaysepError, OSError):
    category = "io"
    exit_code = 6
