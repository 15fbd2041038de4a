"""
Модуль генерации ансамблей Nadj и калибровки масштаба априорного распределения.
"""
from calibration.inference import (
    DEFAULT_CANDIDATES,
    CalibrationResult,
    CandidateDiagnostics,
    EnsembleSource,
    ModelEnsembleSource,
    adjust,
    calibrate_prior_scale,
    generate_ensemble,
    select_scale,
    spread_and_rmse,
)
