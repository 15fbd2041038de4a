"""
Модуль радиально усредненной спектральной плотности мощности (RAPSD).

Перед преобразованием Фурье ячейки суши заполняются средним по океану,
одинаково для прогнозов и наблюдений.
"""
import numpy as np

from grid.models import GridSpec, HindcastSet, ObsSet
from metrics.models import SpectrumProfile, SpectrumRatio
from metrics.scores import aligned_arrays
from utils.exceptions import MetricError


def _ring_index(shape: tuple[int, int]) -> np.ndarray:
    height, width = shape
    ky = np.fft.fftfreq(height) * height
    kx = np.fft.fftfreq(width) * width
    return np.rint(np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)).astype(int)


def _fill_land(values: np.ndarray, grid: GridSpec | None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if grid is None or not grid.land_mask.any():
        return values
    ocean = grid.ocean_mask
    mean = values[..., ocean].mean(axis=-1)
    return np.where(ocean, values, np.asarray(mean)[..., None, None])


def rapsd(values: np.ndarray, grid: GridSpec | None = None) -> SpectrumProfile:
    """
    |F|² двумерного ДПФ, усредненный по кольцам целого радиуса волнового числа.

    Сумма power·counts по кольцам равна Σ|F|².

    Args:
        values: Поле [H, W]
        grid: Сетка для заполнения суши (None - поле без суши)

    Returns:
        SpectrumProfile: Профиль по кольцам
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise MetricError(f"RAPSD expects a 2-D field, got shape {values.shape}")
    if values.shape[0] < 2 and values.shape[1] < 2:
        raise MetricError("RAPSD of a 1×1 grid is degenerate")
    power = np.abs(np.fft.fft2(_fill_land(values, grid))) ** 2
    rings = _ring_index(values.shape)
    counts = np.bincount(rings.ravel())
    sums = np.bincount(rings.ravel(), weights=power.ravel())
    present = counts > 0
    return SpectrumProfile(
        rings=np.arange(len(counts))[present],
        power=sums[present] / counts[present],
        counts=counts[present],
    )


def _mean_profile(fields: np.ndarray, grid: GridSpec) -> SpectrumProfile:
    profiles = [rapsd(field, grid) for field in fields]
    return SpectrumProfile(
        rings=profiles[0].rings,
        power=np.mean([profile.power for profile in profiles], axis=0),
        counts=profiles[0].counts,
    )


def rapsd_ratio(ens: HindcastSet, obs: ObsSet, target_month: int, lead: int) -> SpectrumRatio:
    """
    Отношение среднего спектра прогноза к среднему спектру наблюдений.

    Средние берутся по датам, проверяемым в целевом месяце; диапазон
    min..max строится по спектрам отдельных участников.

    Args:
        ens: Ансамбль
        obs: Наблюдения
        target_month: Календарный месяц действия прогноза
        lead: Заблаговременность

    Returns:
        SpectrumRatio: Отношение и диапазон по участникам
    """
    if lead not in ens.leads:
        raise MetricError(f"lead {lead} not in dataset leads {ens.leads}")
    l = ens.leads.index(lead)
    times = [t for t, (_, month) in enumerate(ens.init_times) if (month + lead - 2) % 12 + 1 == target_month]
    if not times:
        raise MetricError(f"no initialisation time verifies in month {target_month} at lead {lead}")
    x, y = aligned_arrays(ens, obs)
    observed = _mean_profile(y[times, l], ens.grid)
    member_power = np.stack([
        _mean_profile(x[times, k, l], ens.grid).power for k in range(ens.n_members)
    ])
    usable = observed.power > 0

    def divide(power: np.ndarray) -> np.ndarray:
        return np.divide(power, observed.power, out=np.full_like(power, np.nan), where=usable)

    member_ratio = np.stack([divide(power) for power in member_power])
    return SpectrumRatio(
        rings=observed.rings,
        ratio=divide(member_power.mean(axis=0)),
        member_min=member_ratio.min(axis=0),
        member_max=member_ratio.max(axis=0),
        target_month=target_month,
        lead=lead,
        n_times=len(times),
    )
