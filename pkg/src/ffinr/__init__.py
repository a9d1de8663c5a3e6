"""Fourier-feature implicit neural representations with an adaptive embedding
filter, a line-searched filter learning rate and NTK-based numerical checks."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, ContractFailure, FfinrError, FormatError, InvalidInputError,
    InvalidStateError, NumericAbort, ResourceError, UnsupportedDomainError,
)
