"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes; the message names both."""


class ConfigError(ValueError):
    """A configuration value is out of its allowed range."""


class DataError(ValueError):
    """Input data is missing, malformed, or inconsistent."""


class FormatError(DataError):
    """A serialized file has a bad magic number or version."""


class CorruptionError(DataError):
    """A serialized file is truncated or has a size mismatch."""
