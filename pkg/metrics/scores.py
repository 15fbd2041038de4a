"""
Модуль поклеточных вероятностных метрик ансамбля.

Статистики считаются в каждой ячейке по датам инициализации, затем
усредняются по площади океана для каждой заблаговременности.
"""
import numpy as np

from grid.models import HindcastSet, ObsSet
from grid.operations import marginal_mask_array, weighted_mean
from metrics.models import MetricSeries, QuantilePairs, RankHistogram
from objectives.crps import crps_ensemble_array
from utils.exceptions import MetricError


def aligned_arrays(ens: HindcastSet, obs: ObsSet) -> tuple[np.ndarray, np.ndarray]:
    """
    Массивы ансамбля [T, K, L, H, W] и наблюдений [T, L, H, W] с нулями на суше.
    """
    obs.require_aligned(ens)
    ocean = ens.grid.ocean_mask
    return np.where(ocean, ens.values, 0.0), np.where(ocean, obs.values, 0.0)


def _series(name: str, ens: HindcastSet, values: list[float], **kwargs) -> MetricSeries:
    return MetricSeries(name=name, leads=ens.leads, values=values, members=ens.n_members, **kwargs)


def rmse_and_spread(ens: HindcastSet, obs: ObsSet) -> tuple[MetricSeries, MetricSeries]:
    """
    RMSE среднего по ансамблю и разброс (корень несмещенной дисперсии ансамбля).

    Args:
        ens: Ансамбль (не менее двух участников)
        obs: Наблюдения

    Returns:
        tuple: (rmse, spread)
    """
    if ens.n_members < 2:
        raise MetricError("spread requires at least two members")
    x, y = aligned_arrays(ens, obs)
    mse = ((x.mean(axis=1) - y) ** 2).mean(axis=0)
    variance = x.var(axis=1, ddof=1).mean(axis=0)
    rmse = [float(weighted_mean(np.sqrt(mse[l]), ens.grid)) for l in range(len(ens.leads))]
    spread = [float(weighted_mean(np.sqrt(variance[l]), ens.grid)) for l in range(len(ens.leads))]
    return _series("rmse", ens, rmse), _series("spread", ens, spread)


def soe(ens: HindcastSet, obs: ObsSet) -> MetricSeries:
    """
    Отношение разброса к ошибке √((M+1)/M · σ²/MSE) в каждой ячейке.

    Ячейки с нулевой MSE исключаются из пространственного среднего, их число
    записывается в excluded.
    """
    members = ens.n_members
    if members < 2:
        raise MetricError("SOE requires at least two members")
    x, y = aligned_arrays(ens, obs)
    mse = ((x.mean(axis=1) - y) ** 2).mean(axis=0)
    variance = x.var(axis=1, ddof=1).mean(axis=0)
    values, excluded = [], []
    for l in range(len(ens.leads)):
        usable = mse[l] > 0
        ratio = np.sqrt((members + 1) / members * np.divide(variance[l], mse[l], out=np.zeros_like(mse[l]), where=usable))
        excluded.append(int((~usable & ens.grid.ocean_mask).sum()))
        if not (usable & ens.grid.ocean_mask).any():
            values.append(float("nan"))
            continue
        values.append(float(weighted_mean(ratio, ens.grid, usable)))
    return _series("soe", ens, values, excluded=excluded)


def crps_metric(ens: HindcastSet, obs: ObsSet) -> MetricSeries:
    """
    CRPS ансамбля в каждой ячейке, среднее по времени и по площади.
    """
    x, y = aligned_arrays(ens, obs)
    values = []
    for l in range(len(ens.leads)):
        per_cell = crps_ensemble_array(y[:, l], np.moveaxis(x[:, :, l], 1, 0)).mean(axis=0)
        values.append(float(weighted_mean(per_cell, ens.grid)))
    return _series("crps", ens, values)


def _cell_masks(ens: HindcastSet, y: np.ndarray, marginal_only: bool, lo: float, hi: float) -> np.ndarray:
    if marginal_only:
        return marginal_mask_array(y, ens.grid, lo, hi)
    return np.broadcast_to(ens.grid.ocean_mask, y.shape)


def rank_histogram_cdf(
    ens: HindcastSet,
    obs: ObsSet,
    marginal_only: bool = True,
    seed: int = 0,
    lo: float = 0.15,
    hi: float = 0.90,
) -> list[RankHistogram]:
    """
    Ранги наблюдения среди участников, объединенные по ячейкам и датам.

    Совпадения с участниками разрешаются случайно и равномерно среди
    позиций совпадения.

    Args:
        ens: Ансамбль
        obs: Наблюдения
        marginal_only: Только ячейки краевой зоны (по наблюдениям)
        seed: Зерно разрешения совпадений
        lo: Нижняя граница краевой зоны
        hi: Верхняя граница краевой зоны

    Returns:
        list: Гистограмма для каждой заблаговременности
    """
    x, y = aligned_arrays(ens, obs)
    masks = _cell_masks(ens, y, marginal_only, lo, hi)
    rng = np.random.default_rng(seed)
    members = ens.n_members
    result = []
    for l, lead in enumerate(ens.leads):
        cells = masks[:, l]
        truth = y[:, l][cells]
        ensemble = np.moveaxis(x[:, :, l], 1, -1)[cells]
        below = (ensemble < truth[:, None]).sum(axis=1)
        ties = (ensemble == truth[:, None]).sum(axis=1)
        ranks = below + rng.integers(0, ties + 1)
        counts = np.bincount(ranks, minlength=members + 1).astype(float)
        n = int(counts.sum())
        if n == 0:
            result.append(RankHistogram(lead=lead, counts=counts, cdf=np.full(members + 1, np.nan), n_ranks=0, empty=True))
            continue
        result.append(RankHistogram(lead=lead, counts=counts, cdf=np.cumsum(counts) / n, n_ranks=n))
    return result


def qq_quantiles(
    ens: HindcastSet,
    obs: ObsSet,
    marginal_only: bool = True,
    lo: float = 0.15,
    hi: float = 0.90,
) -> list[QuantilePairs]:
    """
    Парные перцентили 1..99 объединенных значений участников и наблюдений.
    """
    x, y = aligned_arrays(ens, obs)
    masks = _cell_masks(ens, y, marginal_only, lo, hi)
    percentiles = np.arange(1, 100, dtype=float)
    result = []
    for l, lead in enumerate(ens.leads):
        cells = masks[:, l]
        truth = y[:, l][cells]
        pooled = np.moveaxis(x[:, :, l], 1, -1)[cells].reshape(-1)
        if truth.size == 0 or pooled.size == 0:
            raise MetricError(f"no cells to pool for QQ quantiles at lead {lead}")
        result.append(QuantilePairs(
            lead=lead,
            percentiles=percentiles,
            forecast=np.percentile(pooled, percentiles),
            observed=np.percentile(truth, percentiles),
        ))
    return result
