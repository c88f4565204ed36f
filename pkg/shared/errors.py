"""Exception hierarchy shared by every cadenza package."""


class CadenzaError(Exception):
    """Base class for all errors raised on purpose by cadenza."""


class InvalidInput(CadenzaError, ValueError):
    pass


class SequenceTooLong(InvalidInput):
    def __init__(self, n_frames, max_positions):
        super().__init__(f'sequence of {n_frames} frames exceeds max_positions={max_positions}')
        self.n_frames = n_frames
        self.max_positions = max_positions


class ConfigError(CadenzaError, ValueError):
    pass


class NumericalError(CadenzaError, ArithmeticError):
    def __init__(self, message, tensor_name=None):
        if tensor_name:
            message = f'{message} (tensor: {tensor_name})'
        super().__init__(message)
        self.tensor_name = tensor_name


class IoError(CadenzaError, OSError):
    pass


class FormatError(IoError):
    """Wrong magic, unsupported version or truncated payload."""
