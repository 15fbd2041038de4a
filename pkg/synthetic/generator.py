"""
Модуль синтетических данных: правда с сезонной кромкой льда и смещенные недодисперсные прогнозы.

Правда: SIC = σ(k·(r_edge(m, j) - r) + A·a_n), где r - расстояние от полюса
(центра сетки), r_edge - сезонная кромка с линейным трендом, a_n -
пространственно коррелированная аномалия с AR(1) по месяцам.

Прогноз участника k: α(l)·y + (1 - α(l))·ĉ + b(m, l)·p + d·(1 - α(l))·(y'_k - ĉ),
где ĉ - климатология модели без тренда, p - профиль краевой зоны, y'_k -
независимая реализация правды, d - коэффициент недодисперсии.
"""
import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import expit

from configuration.base import derive_rng
from configuration.run_config import SynthConfig
from grid.models import GridSpec, HindcastSet, ObsSet
from grid.operations import polar_radius
from utils.loggers import logger


LAND_STREAM = 1
TRUTH_STREAM = 2
HINDCAST_STREAM = 3


def generate_land_mask(cfg: SynthConfig) -> np.ndarray:
    """
    Суша: углы сетки дальше corner_radius от полюса и несколько круглых островов.
    """
    shape = (cfg.height, cfg.width)
    radius = polar_radius(shape)
    land = radius > cfg.corner_radius
    rng = derive_rng(cfg.seed, LAND_STREAM)
    rows, cols = np.indices(shape)
    for _ in range(cfg.n_islands):
        distance = rng.uniform(0.3, 0.9)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        center_row = (cfg.height - 1) / 2.0 + distance * cfg.height / 2.0 * np.sin(angle)
        center_col = (cfg.width - 1) / 2.0 + distance * cfg.width / 2.0 * np.cos(angle)
        land |= (rows - center_row) ** 2 + (cols - center_col) ** 2 <= cfg.island_radius ** 2
    return land


def synthetic_grid(cfg: SynthConfig) -> GridSpec:
    return GridSpec.uniform(cfg.height, cfg.width, land_mask=generate_land_mask(cfg))


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, ...], correlation_length: float) -> np.ndarray:
    """
    Белый шум, сглаженный гауссовым ядром σ = L/2 (автокорреляция e^-1 на сдвиге L), с единичной дисперсией.
    """
    field = gaussian_filter(rng.standard_normal(shape), sigma=correlation_length / 2.0, mode="wrap")
    std = field.std()
    return field / std if std > 0 else field


def edge_radius(cfg: SynthConfig, month: int, year: int, with_trend: bool = True) -> float:
    """
    Положение кромки льда: максимум в марте, минимум в сентябре.
    """
    seasonal = cfg.seasonal_amplitude * np.cos(2.0 * np.pi * (month - 3) / 12.0)
    trend = cfg.trend_per_year * (year - cfg.start_year) if with_trend else 0.0
    return cfg.edge_radius + seasonal + trend


def _sic(cfg: SynthConfig, radius: np.ndarray, month: int, year: int, anomaly: np.ndarray | float, with_trend: bool = True) -> np.ndarray:
    return expit(cfg.sharpness * (edge_radius(cfg, month, year, with_trend) - radius) + cfg.anomaly_std * anomaly)


def _n_months(cfg: SynthConfig) -> int:
    last = 12 * (cfg.end_year - cfg.start_year) + (cfg.init_months[-1] - 1) + (cfg.leads - 1)
    return last + 1


def _index_space(cfg: SynthConfig) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
    init_times = tuple((year, month) for year in range(cfg.start_year, cfg.end_year + 1) for month in cfg.init_months)
    return init_times, tuple(range(1, cfg.leads + 1))


def _month_offset(cfg: SynthConfig, year: int, month: int) -> int:
    return 12 * (year - cfg.start_year) + (month - 1)


def generate_truth(cfg: SynthConfig, grid: GridSpec | None = None) -> ObsSet:
    """
    Синтетические наблюдения, переупорядоченные в структуру (t, l).

    Args:
        cfg: Параметры генератора
        grid: Сетка (по умолчанию строится по cfg)

    Returns:
        ObsSet: Наблюдения [T, L, H, W]
    """
    grid = grid or synthetic_grid(cfg)
    radius = polar_radius(grid.shape)
    rng = derive_rng(cfg.seed, TRUTH_STREAM)
    n_months = _n_months(cfg)
    innovation = np.sqrt(1.0 - cfg.persistence ** 2)

    monthly = np.empty((n_months, *grid.shape))
    anomaly = _smooth_noise(rng, grid.shape, cfg.correlation_length)
    for n in range(n_months):
        if n > 0:
            anomaly = cfg.persistence * anomaly + innovation * _smooth_noise(rng, grid.shape, cfg.correlation_length)
        year, month = cfg.start_year + n // 12, n % 12 + 1
        monthly[n] = _sic(cfg, radius, month, year, anomaly)

    init_times, leads = _index_space(cfg)
    values = np.empty((len(init_times), len(leads), *grid.shape))
    for t, (year, month) in enumerate(init_times):
        start = _month_offset(cfg, year, month)
        values[t] = monthly[start:start + len(leads)]
    values = values.astype(np.float32).astype(float)
    logger.debug(f"synthetic truth: {len(init_times)} init times, {len(leads)} leads, grid {grid.shape}")
    return ObsSet(grid=grid, init_times=init_times, leads=leads, values=values)


def skill(cfg: SynthConfig, lead: int) -> float:
    """
    Доля предсказуемого сигнала α(l) = exp(-skill_decay·l).
    """
    return float(np.exp(-cfg.skill_decay * lead))


def bias_amplitude(cfg: SynthConfig, month: int, lead: int) -> float:
    """
    b(m, l): сезонная составляющая по месяцу действия и дрейф с заблаговременностью.
    """
    valid_month = month + lead - 1
    return cfg.bias_amplitude * np.cos(2.0 * np.pi * valid_month / 12.0) + cfg.drift_per_lead * lead


def model_climatology(cfg: SynthConfig, radius: np.ndarray, valid_month: int) -> np.ndarray:
    """
    Климатология модели ĉ: кромка без тренда и без аномалии.
    """
    return _sic(cfg, radius, (valid_month - 1) % 12 + 1, cfg.start_year, 0.0, with_trend=False)


def bias_pattern(cfg: SynthConfig, radius: np.ndarray, valid_month: int) -> np.ndarray:
    """
    Профиль смещения p = 4ĉ(1 - ĉ): максимален на климатологической кромке.
    """
    clim = model_climatology(cfg, radius, valid_month)
    return 4.0 * clim * (1.0 - clim)


def _coarsen(field: np.ndarray, ocean: np.ndarray, sigma: float) -> np.ndarray:
    """
    Нормированное сглаживание по океану: суша не подмешивается в значения.
    """
    if sigma <= 0:
        return field
    weights = gaussian_filter(ocean.astype(float), sigma=sigma, axes=(-2, -1))
    smoothed = gaussian_filter(np.where(ocean, field, 0.0), sigma=sigma, axes=(-2, -1))
    return np.divide(smoothed, weights, out=np.zeros_like(smoothed), where=weights > 0)


def generate_hindcast(truth: ObsSet, cfg: SynthConfig) -> HindcastSet:
    """
    Смещенный недодисперсный ансамбль прогнозов для индексного пространства наблюдений.

    Args:
        truth: Синтетические наблюдения
        cfg: Параметры генератора

    Returns:
        HindcastSet: Прогнозы [T, K, L, H, W]
    """
    grid = truth.grid
    radius = polar_radius(grid.shape)
    ocean = grid.ocean_mask
    y = np.where(ocean, truth.values, 0.0)
    innovation = np.sqrt(1.0 - cfg.persistence ** 2)
    values = np.empty((len(truth.init_times), cfg.members, len(truth.leads), *grid.shape))

    for t, (year, month) in enumerate(truth.init_times):
        rng = derive_rng(cfg.seed, HINDCAST_STREAM, t)
        anomaly = np.stack([_smooth_noise(rng, grid.shape, cfg.correlation_length) for _ in range(cfg.members)])
        for l, lead in enumerate(truth.leads):
            if l > 0:
                fresh = np.stack([_smooth_noise(rng, grid.shape, cfg.correlation_length) for _ in range(cfg.members)])
                anomaly = cfg.persistence * anomaly + innovation * fresh
            valid_month = month + lead - 1
            clim = model_climatology(cfg, radius, valid_month)
            alternative = _sic(cfg, radius, (valid_month - 1) % 12 + 1, year, anomaly)
            alpha = skill(cfg, lead)
            members = (
                alpha * y[t, l]
                + (1.0 - alpha) * clim
                + bias_amplitude(cfg, month, lead) * bias_pattern(cfg, radius, valid_month)
                + cfg.deflation * (1.0 - alpha) * (alternative - clim)
            )
            members = _coarsen(members, ocean, cfg.coarse_sigma)
            values[t, :, l] = np.clip(members, 0.0, 1.0)

    values = values.astype(np.float32).astype(float)
    logger.debug(f"synthetic hindcast: {cfg.members} members, deflation {cfg.deflation}")
    return HindcastSet(grid=grid, init_times=truth.init_times, leads=truth.leads, values=values)


def generate_dataset(cfg: SynthConfig) -> tuple[HindcastSet, ObsSet]:
    """
    Согласованная пара (прогнозы, наблюдения) по одному зерну.
    """
    truth = generate_truth(cfg)
    return generate_hindcast(truth, cfg), truth
