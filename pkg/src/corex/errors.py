"""Exceptions shared across the package."""


class CorexError(Exception):
    """Base class for package errors."""


class DataError(CorexError):
    """Raised when input data cannot be ingested or fails validation."""


class UnsupportedConfigError(CorexError):
    """Raised when a requested computation is outside the supported configuration."""
