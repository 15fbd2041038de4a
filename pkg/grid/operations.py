"""
Модуль операций над пространственными данными.

Средние по ансамблю, взвешенные по площади редукции, маска краевой зоны льда
и разбиение по времени без утечки будущих данных. Все редукции пропускают
ячейки суши и не обращаются к значению-заглушке.
"""
import numpy as np

from grid.enums import SplitName
from grid.models import Field, GridSpec, HindcastSet, InitTime, ObsSet, SampleSet, SplitSpec
from utils.exceptions import EmptyDomainError, SplitError


def ensemble_mean(h: HindcastSet, t: int, l: int) -> Field:
    """
    Среднее по участникам ансамбля x̄_{tl} в каждой ячейке океана.

    Args:
        h: Набор ретроспективных прогнозов
        t: Индекс даты инициализации
        l: Индекс заблаговременности

    Returns:
        Field: Поле среднего по ансамблю
    """
    h.check_index(t, l)
    ocean = h.grid.ocean_mask
    members = np.where(ocean, h.values[t, :, l], 0.0)
    return Field(grid=h.grid, values=members.mean(axis=0))


def ensemble_mean_array(h: HindcastSet) -> np.ndarray:
    """
    Средние по ансамблю для всех (t, l): массив [T, L, H, W], суша = 0.
    """
    return np.where(h.grid.ocean_mask, h.values, 0.0).mean(axis=1)


def weighted_mean(values: np.ndarray, grid: GridSpec, mask: np.ndarray | None = None) -> np.ndarray:
    """
    Взвешенное по площади среднее по последним двум осям.

    Args:
        values: Массив [..., H, W]
        grid: Сетка с площадями и маской суши
        mask: Дополнительная маска учитываемых ячеек (по умолчанию весь океан)

    Returns:
        np.ndarray: Средние по ведущим осям
    """
    cells = grid.ocean_mask if mask is None else (mask & grid.ocean_mask)
    weights = np.where(cells, grid.cell_area, 0.0)
    total = weights.sum()
    if total <= 0:
        raise EmptyDomainError("no ocean cells to average over")
    filled = np.where(cells, values, 0.0)
    return (filled * weights).sum(axis=(-2, -1)) / total


def area_weighted_mean(f: Field) -> float:
    """
    Σ(values·area)/Σ(area) по ячейкам океана.
    """
    f.grid.require_ocean()
    return float(weighted_mean(f.values, f.grid))


def marginal_mask(obs: Field, lo: float = 0.15, hi: float = 0.90) -> np.ndarray:
    """
    Маска краевой зоны льда: lo ≤ SIC ≤ hi (замкнутый интервал), суша всегда False.

    Args:
        obs: Наблюдаемое поле концентрации
        lo: Нижняя граница
        hi: Верхняя граница

    Returns:
        np.ndarray: Булева маска [H, W]
    """
    return marginal_mask_array(obs.values, obs.grid, lo, hi)


def marginal_mask_array(values: np.ndarray, grid: GridSpec, lo: float = 0.15, hi: float = 0.90) -> np.ndarray:
    if not 0.0 <= lo < hi <= 1.0:
        raise EmptyDomainError(f"marginal bounds must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")
    filled = np.where(grid.ocean_mask, values, -1.0)
    return (filled >= lo) & (filled <= hi) & grid.ocean_mask


def month_index(init_time: InitTime) -> int:
    year, month = init_time
    return 12 * year + (month - 1)


def valid_month_index(init_time: InitTime, lead: int) -> int:
    """
    Абсолютный номер месяца, на который действует прогноз (первая заблаговременность = месяц инициализации).
    """
    return month_index(init_time) + (lead - 1)


def temporal_split(h: HindcastSet, o: ObsSet, s: SplitSpec) -> tuple[SampleSet, SampleSet, SampleSet]:
    """
    Разбивает пары (t, l) на обучение, валидацию и тест без утечки.

    Пара попадает в выборку, если год инициализации лежит в ее диапазоне, а
    месяц действия прогноза строго раньше начала любой следующей выборки.

    Args:
        h: Набор ретроспективных прогнозов
        o: Согласованный набор наблюдений
        s: Диапазоны лет

    Returns:
        tuple: (train, val, test)
    """
    o.require_aligned(h)
    years = [year for year, _ in h.init_times]
    ranges = s.ranges()
    for name, (start, end) in ranges.items():
        if not any(start <= year <= end for year in years):
            raise SplitError(f"{name.value} range ({start}, {end}) contains no initialisation time of the dataset")

    order = [SplitName.train, SplitName.val, SplitName.test]
    result = []
    for position, name in enumerate(order):
        start, end = ranges[name]
        boundary = 12 * ranges[order[position + 1]][0] if position + 1 < len(order) else None
        pairs = []
        for t, init_time in enumerate(h.init_times):
            if not start <= init_time[0] <= end:
                continue
            for l, lead in enumerate(h.leads):
                if boundary is not None and valid_month_index(init_time, lead) >= boundary:
                    continue
                pairs.append((t, l))
        result.append(SampleSet(name=name, hindcast=h, obs=o, pairs=tuple(pairs)))
    return tuple(result)


def polar_radius(shape: tuple[int, int]) -> np.ndarray:
    """
    Нормированное расстояние ячеек от центра сетки (полюса): 1 на середине края.

    Используется как заменитель широты на модельной сетке.
    """
    height, width = shape
    rows = (np.arange(height) - (height - 1) / 2.0) / (height / 2.0)
    cols = (np.arange(width) - (width - 1) / 2.0) / (width / 2.0)
    return np.sqrt(rows[:, None] ** 2 + cols[None, :] ** 2)
