from .errors import (  # noqa: F401
    CadenzaError,
    ConfigError,
    FormatError,
    InvalidInput,
    IoError,
    NumericalError,
    SequenceTooLong,
)
