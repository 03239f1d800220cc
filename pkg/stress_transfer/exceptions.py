class StressTransferError(Exception):
    '''Base class for every error raised by stress_transfer.'''


class InvalidArgumentError(StressTransferError, ValueError):
    pass


class ShapeError(StressTransferError, ValueError):
    def __init__(self, what: str, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f'{what}: expected shape {expected}, got {actual}')


class CacheError(StressTransferError, RuntimeError):
    pass


# data
class SessionFormatError(StressTransferError, ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f'{path}, line {line}: {message}')


class EmptySessionError(StressTransferError, ValueError):
    pass


class DegenerateChannelError(StressTransferError, ValueError):
    pass


class WindowingError(StressTransferError, ValueError):
    pass


class SingleClassError(StressTransferError, ValueError):
    pass


# model
class TrainingDivergedError(StressTransferError, ArithmeticError):
    pass


class ContainerError(StressTransferError):
    pass


class BadMagicError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class TruncatedFileError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


class ProvenanceError(ContainerError):
    pass


# cli
class ConfigError(StressTransferError, ValueError):
    pass


class NotInteractiveError(StressTransferError):
    pass
