"""
Модуль с иерархией доменных исключений.

Каждое исключение несет код завершения процесса, который CLI возвращает
оболочке при ошибке.
"""


class ExitCode:
    ok = 0
    unexpected = 1
    missing_input = 3
    config = 4
    grid_mismatch = 5
    numerical = 6
    storage = 7
    invalid_request = 8


class SeaIceError(Exception):
    """Базовое исключение пакета."""
    exit_code: int = ExitCode.unexpected


class MissingInputError(SeaIceError):
    exit_code = ExitCode.missing_input


class ConfigError(SeaIceError):
    exit_code = ExitCode.config


class GridMismatchError(SeaIceError):
    exit_code = ExitCode.grid_mismatch


class ShapeMismatchError(SeaIceError):
    exit_code = ExitCode.grid_mismatch


class NonFiniteError(SeaIceError):
    exit_code = ExitCode.numerical


class TrainingDivergedError(SeaIceError):
    exit_code = ExitCode.numerical


class ChecksumError(SeaIceError):
    exit_code = ExitCode.storage


class GridPackFormatError(SeaIceError):
    exit_code = ExitCode.storage


class CheckpointMismatchError(SeaIceError):
    exit_code = ExitCode.storage


class IndexOutOfRangeError(SeaIceError):
    exit_code = ExitCode.invalid_request


class EmptyDomainError(SeaIceError):
    exit_code = ExitCode.invalid_request


class SplitError(SeaIceError):
    exit_code = ExitCode.invalid_request


class ModeMismatchError(SeaIceError):
    exit_code = ExitCode.invalid_request


class UntrainedCheckpointError(SeaIceError):
    exit_code = ExitCode.invalid_request


class CalibrationError(SeaIceError):
    exit_code = ExitCode.invalid_request


class ClimatologyError(SeaIceError):
    exit_code = ExitCode.invalid_request


class MetricError(SeaIceError):
    exit_code = ExitCode.invalid_request


__all__ = [
    "ExitCode",
    "SeaIceError",
    "MissingInputError",
    "ConfigError",
    "GridMismatchError",
    "ShapeMismatchError",
    "NonFiniteError",
    "TrainingDivergedError",
    "ChecksumError",
    "GridPackFormatError",
    "CheckpointMismatchError",
    "IndexOutOfRangeError",
    "EmptyDomainError",
    "SplitError",
    "ModeMismatchError",
    "UntrainedCheckpointError",
    "CalibrationError",
    "ClimatologyError",
    "MetricError",
]
