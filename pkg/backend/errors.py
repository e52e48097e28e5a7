"""Exception hierarchy shared by the services.

Services only raise; `cli.py` maps these to exit codes and `main.py` to HTTP
status codes.
"""


class NBMRError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1
    http_status = 500


class ConfigError(NBMRError):
    """Invalid parameters or configuration values."""

    exit_code = 2
    http_status = 422


class ConstructionError(NBMRError):
    """A code could not be built with the requested parameters."""

    exit_code = 3
    http_status = 409


class CodeFileError(NBMRError):
    """Malformed, truncated or corrupted code file."""

    exit_code = 2
    http_status = 400


class FieldError(NBMRError, ValueError):
    """Arithmetic outside the field's domain (inverse of zero)."""


class ChannelError(NBMRError):
    """Observations that do not match the symbol layout."""

    exit_code = 2
    http_status = 422


class DecodeError(NBMRError):
    """Decoder inputs that do not match the code."""

    exit_code = 2
    http_status = 422
