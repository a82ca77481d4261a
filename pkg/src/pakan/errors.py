"""Exception types shared across the package."""


class PakanError(Exception):
    """Base class for all package errors."""


class ShapeError(PakanError):
    """Tensor dimensions violate an operation's shape contract."""


class ConfigError(PakanError):
    """Invalid configuration value or combination."""


class ValidationError(PakanError):
    """Data values violate a documented range or consistency rule."""


class ContractError(PakanError):
    """An API was called outside its usage contract (e.g. stale gradients)."""


class PktnError(PakanError):
    """Malformed PKTN container; message includes the byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
