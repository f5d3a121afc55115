"""Exception types shared across the package."""


class RotRNNError(Exception):
    pass


class DimensionError(RotRNNError, ValueError):
    """Operand shapes do not agree."""


class ContractError(RotRNNError, ValueError):
    """A precondition of an operation was violated."""


class ConfigError(RotRNNError, ValueError):
    """Invalid model or run configuration (odd state size for a rotation cell, ...)."""


class DataError(RotRNNError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class CheckpointError(RotRNNError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class VocabMismatchError(CheckpointError):
    pass


class DivergenceError(RotRNNError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record or {}
