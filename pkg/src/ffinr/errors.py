"""Exception hierarchy shared by every module."""


class FfinrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FfinrError, ValueError):
    pass


class UnsupportedDomainError(InvalidInputError):
    pass


class InvalidStateError(FfinrError, RuntimeError):
    """Raised when cached state (e.g. a forward tape) does not match the call."""


class NumericAbort(FfinrError, FloatingPointError):
    """A non-finite value appeared where the contract forbids it."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class ResourceError(FfinrError, RuntimeError):
    pass


class FormatError(FfinrError, ValueError):
    """File could not be decoded (unsupported format, bit depth, truncation)."""


class ConfigError(FfinrError, ValueError):
    pass


class ContractFailure(FfinrError, AssertionError):
    """A verification report found a violated contract."""
