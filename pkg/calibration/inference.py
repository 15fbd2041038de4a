"""
Модуль генерации скорректированных ансамблей и калибровки масштаба априорного распределения.

Каждый участник получает свою латентную выборку z_k ~ N(μ_ω, (s·σ_ω)²I) и
одно стохастическое декодирование. Потоки случайных чисел выводятся из
корневого зерна и ключей (t, l, кандидат), поэтому результат не зависит от
числа потоков выполнения.
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Protocol

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from autodiff import Tensor, no_grad
from configuration.base import derive_rng
from configuration.run_config import TrainMode
from cvae.conditioning import ConditionBatch
from cvae.model import CVAEModel
from grid.enums import RoleTag
from grid.models import AdjustedEnsemble, HindcastSet, InitTime, Provenance, SampleSet
from grid.operations import ensemble_mean_array, weighted_mean
from utils.exceptions import CalibrationError, ShapeMismatchError, UntrainedCheckpointError
from utils.loggers import logger, run_extra


MEMBER_CHUNK = 20 # Участников за один проход генератора
ADJUST_STREAM = 10_000 # Ключ потока adjust; кандидаты калибровки используют 0..n-1
DEFAULT_CANDIDATES = tuple(1.0 + 0.25 * i for i in range(17))


class EnsembleSource(Protocol):
    """
    Источник ансамблей: поля [K, B, H, W] для пакета условий, суша = 0.
    """

    def sample(self, batch: ConditionBatch, members: int, scale: float, rng: np.random.Generator) -> np.ndarray:
        ...


def generate_ensemble(
    model: CVAEModel,
    batch: ConditionBatch,
    members: int,
    scale: float,
    rng: np.random.Generator,
    require_trained: bool = True,
) -> np.ndarray:
    """
    K участников для каждого условия пакета из масштабированного априорного распределения.

    В режиме mse вместо стохастического декодирования берется среднее
    декодера (ансамбль Nadj_mse).

    Args:
        model: Обученная модель
        batch: Условия (x̄ и временные каналы)
        members: Число участников K
        scale: Множитель s стандартного отклонения априорного распределения
        rng: Генератор латентных выборок и шума
        require_trained: Отклонять необученную модель

    Returns:
        np.ndarray: Поля [K, B, H, W] в [0, 1], суша = 0
    """
    if require_trained and not model.trained:
        raise UntrainedCheckpointError("ensemble generation requires a trained checkpoint")
    if members < 1:
        raise ShapeMismatchError("ensemble size K must be at least 1")
    if scale <= 0:
        raise CalibrationError(f"prior scale must be positive, got {scale}")
    noise_rng = rng if model.mode == TrainMode.crps else None
    chunks = []
    with no_grad():
        estimate = model.deterministic_estimate(batch)
        prior = model.prior(batch, estimate.field)
        mean, std = prior.mean.data, prior.std
        for start in range(0, members, MEMBER_CHUNK):
            count = min(MEMBER_CHUNK, members - start)
            z = mean + scale * std * rng.standard_normal((count, *mean.shape))
            out = model.generate(Tensor(z), estimate, noise_rng, 1, clamp=True)
            chunks.append(out.data)
    return np.concatenate(chunks, axis=0)


class ModelEnsembleSource:
    """
    Источник ансамблей на основе модели cVAE.
    """

    def __init__(self, model: CVAEModel, require_trained: bool = True):
        self.model = model
        self.require_trained = require_trained

    def sample(self, batch: ConditionBatch, members: int, scale: float, rng: np.random.Generator) -> np.ndarray:
        return generate_ensemble(self.model, batch, members, scale, rng, self.require_trained)


def _as_source(source: CVAEModel | EnsembleSource) -> EnsembleSource:
    return ModelEnsembleSource(source) if isinstance(source, CVAEModel) else source


class CandidateDiagnostics(BaseModel):
    scale: float
    spread: float = Field(..., description="sqrt of area-weighted, time-averaged ensemble variance")
    rmse: float = Field(..., description="RMSE of the ensemble mean")
    criterion: float = Field(..., description="|spread - rmse|")


class CalibrationResult(BaseModel):
    """
    Выбранный масштаб s и диагностика по всем кандидатам.
    """
    scale: float = Field(..., gt=0)
    candidates: list[CandidateDiagnostics]
    members: int
    validation_span: tuple[InitTime, InitTime]
    n_pairs: int
    root_seed: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.candidates])


def spread_and_rmse(
    source: EnsembleSource,
    val: SampleSet,
    members: int,
    scale: float,
    rng_key: int,
    root_seed: int,
    workers: int = 1,
    x_mean: np.ndarray | None = None,
) -> tuple[float, float]:
    """
    Разброс ансамбля и RMSE среднего, усредненные по времени и по площади.

    Args:
        source: Источник ансамблей
        val: Валидационная выборка
        members: Размер ансамбля K
        scale: Множитель s
        rng_key: Ключ потока (индекс кандидата)
        root_seed: Корневое зерно
        workers: Число потоков по парам (t, l)
        x_mean: Предвычисленные средние [T, L, H, W]

    Returns:
        tuple: (spread, rmse)
    """
    hindcast, obs = val.hindcast, val.obs
    x_mean = ensemble_mean_array(hindcast) if x_mean is None else x_mean
    ocean = hindcast.grid.ocean_mask

    def moments(pair: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        t, l = pair
        batch = ConditionBatch.from_pairs(hindcast, [pair], x_mean=x_mean)
        ensemble = source.sample(batch, members, scale, derive_rng(root_seed, t, l, rng_key))[:, 0]
        truth = np.where(ocean, obs.values[t, l], 0.0)
        return ensemble.var(axis=0), (ensemble.mean(axis=0) - truth) ** 2

    variance = np.zeros(hindcast.grid.shape)
    squared_error = np.zeros(hindcast.grid.shape)
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        for var, err in pool.map(moments, val.pairs):
            variance += var
            squared_error += err
    n = len(val.pairs)
    spread = float(np.sqrt(weighted_mean(variance / n, hindcast.grid)))
    rmse = float(np.sqrt(weighted_mean(squared_error / n, hindcast.grid)))
    return spread, rmse


def select_scale(diagnostics: list[CandidateDiagnostics]) -> float:
    """
    Кандидат с минимальным |spread - rmse|; при равенстве выбирается меньший s.
    """
    if not diagnostics:
        raise CalibrationError("no candidate scale factors to choose from")
    best = None
    for item in sorted(diagnostics, key=lambda d: d.scale):
        if best is None or item.criterion < best.criterion:
            best = item
    return best.scale


def calibrate_prior_scale(
    source: CVAEModel | EnsembleSource,
    val: SampleSet,
    members: int = 200,
    candidates: list[float] | tuple[float, ...] | None = DEFAULT_CANDIDATES,
    root_seed: int = 11,
    workers: int = 1,
    run_dir: Path | str | None = None,
) -> CalibrationResult:
    """
    Подбирает масштаб s, уравнивающий разброс ансамбля и RMSE его среднего на валидации.

    Args:
        source: Обученная модель или иной источник ансамблей
        val: Валидационная выборка
        members: Размер ансамбля K
        candidates: Сетка кандидатов s
        root_seed: Корневое зерно потоков
        workers: Число потоков по парам (t, l)
        run_dir: Каталог запуска для журнала

    Returns:
        CalibrationResult: Выбранный s и диагностика
    """
    if not candidates:
        raise CalibrationError("candidate list is empty")
    if any(s <= 0 for s in candidates):
        raise CalibrationError(f"candidate scale factors must be positive: {list(candidates)}")
    if len(val) == 0:
        raise CalibrationError("validation set is empty")
    if isinstance(source, CVAEModel):
        source.grid.require_same(val.hindcast.grid)
    source = _as_source(source)
    x_mean = ensemble_mean_array(val.hindcast)
    extra = run_extra(run_dir, "calibration")

    diagnostics = []
    for index, scale in enumerate(tqdm(sorted(candidates), desc="calibrate", disable=run_dir is None)):
        spread, rmse = spread_and_rmse(source, val, members, scale, index, root_seed, workers, x_mean)
        item = CandidateDiagnostics(scale=scale, spread=spread, rmse=rmse, criterion=abs(spread - rmse))
        diagnostics.append(item)
        logger.info(f"s={scale:.2f} spread={spread:.5f} rmse={rmse:.5f}", extra=extra)

    chosen = select_scale(diagnostics)
    logger.info(f"selected prior scale s={chosen:.2f} with K={members}", extra=extra)
    init_indices = val.init_indices
    span = (val.hindcast.init_times[init_indices[0]], val.hindcast.init_times[init_indices[-1]])
    return CalibrationResult(
        scale=chosen,
        candidates=diagnostics,
        members=members,
        validation_span=span,
        n_pairs=len(val),
        root_seed=root_seed,
    )


def adjust(
    model: CVAEModel,
    hindcast: HindcastSet,
    scale: float,
    members: int = 10,
    root_seed: int = 11,
    workers: int = 1,
) -> AdjustedEnsemble:
    """
    Скорректированный ансамбль Nadj для всех (t, l) набора прогнозов.

    Args:
        model: Обученная модель
        hindcast: Набор ретроспективных прогнозов на сетке обучения
        scale: Множитель s
        members: Размер ансамбля K
        root_seed: Корневое зерно потоков
        workers: Число потоков по парам (t, l)

    Returns:
        AdjustedEnsemble: Ансамбль [T, K, L, H, W] с описанием происхождения
    """
    if not model.trained:
        raise UntrainedCheckpointError("adjust requires a trained checkpoint")
    model.grid.require_same(hindcast.grid)
    x_mean = ensemble_mean_array(hindcast)
    pairs = [(t, l) for t in range(len(hindcast.init_times)) for l in range(len(hindcast.leads))]

    def run(pair: tuple[int, int]) -> np.ndarray:
        t, l = pair
        batch = ConditionBatch.from_pairs(hindcast, [pair], x_mean=x_mean)
        return generate_ensemble(model, batch, members, scale, derive_rng(root_seed, t, l, ADJUST_STREAM))[:, 0]

    values = np.zeros((len(hindcast.init_times), members, len(hindcast.leads), *hindcast.grid.shape))
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        for (t, l), ensemble in zip(pairs, pool.map(run, pairs)):
            values[t, :, l] = ensemble

    notes = "nadj" if model.mode == TrainMode.crps else "nadj_mse"
    return AdjustedEnsemble(
        grid=hindcast.grid,
        init_times=hindcast.init_times,
        leads=hindcast.leads,
        values=values,
        role=RoleTag.adjusted,
        provenance=Provenance(
            role=RoleTag.adjusted,
            scale=scale,
            root_seed=root_seed,
            checkpoint_id=model.checkpoint_id,
            clamped=True,
            notes=notes,
        ),
    )
