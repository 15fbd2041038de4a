"""
Модуль интегральных метрик: площадь и протяженность льда, ошибка кромки,
коэффициенты корреляции аномалий.
"""
import numpy as np

from grid.models import GridSpec, HindcastSet, ObsSet
from grid.operations import polar_radius
from metrics.models import PROTOCOL_INTEGRATED, PROTOCOL_PATTERN, MetricSeries, SpreadMap
from metrics.scores import aligned_arrays
from utils.exceptions import MetricError


EDGE_THRESHOLD = 0.15


def _ocean_area(grid: GridSpec, domain: np.ndarray | None = None) -> np.ndarray:
    cells = grid.ocean_mask if domain is None else grid.ocean_mask & domain
    return np.where(cells, grid.cell_area, 0.0)


def _filled(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.where(grid.ocean_mask, values, 0.0)


def sia(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    Площадь льда Σ SIC·area по океану для полей [..., H, W].
    """
    return (_filled(values, grid) * _ocean_area(grid)).sum(axis=(-2, -1))


def sie(values: np.ndarray, grid: GridSpec, threshold: float = EDGE_THRESHOLD) -> np.ndarray:
    """
    Протяженность льда Σ 1[SIC > порога]·area.
    """
    return ((_filled(values, grid) > threshold) * _ocean_area(grid)).sum(axis=(-2, -1))


def domain_mask(grid: GridSpec, max_radius: float | None = None) -> np.ndarray | None:
    """
    Область интегрирования IIEE: ячейки не дальше max_radius от полюса (None - вся сетка).
    """
    if max_radius is None:
        return None
    return polar_radius(grid.shape) <= max_radius


def iiee(forecast: np.ndarray, observed: np.ndarray, grid: GridSpec, domain: np.ndarray | None = None, threshold: float = EDGE_THRESHOLD) -> np.ndarray:
    """
    Интегральная ошибка кромки Σ |1[y > порога] - 1[ŷ > порога]|·area.

    Args:
        forecast: Прогнозные поля [..., H, W]
        observed: Наблюдаемые поля той же формы
        grid: Сетка
        domain: Дополнительная маска области
        threshold: Порог кромки

    Returns:
        np.ndarray: Площадь расхождения
    """
    mismatch = (_filled(forecast, grid) > threshold) != (_filled(observed, grid) > threshold)
    return (mismatch * _ocean_area(grid, domain)).sum(axis=(-2, -1))


def _monthly_anomalies(series: np.ndarray, months: np.ndarray) -> np.ndarray:
    """
    Аномалии относительно среднего по годам для каждого месяца инициализации (ось 0).
    """
    anomalies = np.array(series, dtype=float)
    for month in np.unique(months):
        rows = months == month
        anomalies[rows] -= anomalies[rows].mean(axis=0)
    return anomalies


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    a = a - a.mean()
    b = b - b.mean()
    denominator = np.sqrt((a * a).sum() * (b * b).sum())
    if denominator == 0:
        return None
    return float((a * b).sum() / denominator)


def acc_and_pattern_corr(ens: HindcastSet, obs: ObsSet, quantity: str = "sia") -> tuple[MetricSeries, MetricSeries]:
    """
    ACC интегральной величины и средняя пространственная корреляция аномалий.

    Аномалии считаются относительно климатологии по месяцу инициализации
    для каждой заблаговременности. Даты с вырожденным полем аномалий
    пропускаются при усреднении корреляции поля.

    Args:
        ens: Ансамбль (используется среднее)
        obs: Наблюдения
        quantity: Интегральная величина для ACC: sia или sie

    Returns:
        tuple: (acc, pattern_corr)
    """
    integrate = {"sia": sia, "sie": sie}.get(quantity)
    if integrate is None:
        raise MetricError(f"unknown integrated quantity '{quantity}'")
    years = {year for year, _ in ens.init_times}
    if len(years) < 3:
        raise MetricError(f"ACC requires at least 3 initialisation years, got {len(years)}")
    x, y = aligned_arrays(ens, obs)
    mean = x.mean(axis=1)
    months = np.array([month for _, month in ens.init_times])
    ocean = ens.grid.ocean_mask

    acc, pattern = [], []
    for l, lead in enumerate(ens.leads):
        correlation = _pearson(
            _monthly_anomalies(integrate(mean[:, l], ens.grid), months),
            _monthly_anomalies(integrate(y[:, l], ens.grid), months),
        )
        if correlation is None:
            raise MetricError(f"zero-variance {quantity} anomaly series at lead {lead}")
        acc.append(correlation)

        forecast_anomaly = _monthly_anomalies(mean[:, l], months)
        observed_anomaly = _monthly_anomalies(y[:, l], months)
        per_time = [
            _pearson(forecast_anomaly[t][ocean], observed_anomaly[t][ocean])
            for t in range(len(ens.init_times))
        ]
        per_time = [value for value in per_time if value is not None]
        if not per_time:
            raise MetricError(f"every anomaly field is degenerate at lead {lead}")
        pattern.append(float(np.mean(per_time)))

    common = dict(leads=ens.leads, members=ens.n_members)
    return (
        MetricSeries(name=f"acc_{quantity}", values=acc, protocol=PROTOCOL_INTEGRATED, **common),
        MetricSeries(name="pattern_corr", values=pattern, protocol=PROTOCOL_PATTERN, **common),
    )


def integrated_errors(ens: HindcastSet, obs: ObsSet, max_radius: float | None = None) -> list[MetricSeries]:
    """
    RMSE площади и протяженности льда среднего по ансамблю и средняя IIEE.
    """
    x, y = aligned_arrays(ens, obs)
    mean = x.mean(axis=1)
    domain = domain_mask(ens.grid, max_radius)
    sia_rmse, sie_rmse, edge = [], [], []
    for l in range(len(ens.leads)):
        sia_rmse.append(float(np.sqrt(((sia(mean[:, l], ens.grid) - sia(y[:, l], ens.grid)) ** 2).mean())))
        sie_rmse.append(float(np.sqrt(((sie(mean[:, l], ens.grid) - sie(y[:, l], ens.grid)) ** 2).mean())))
        edge.append(float(iiee(mean[:, l], y[:, l], ens.grid, domain).mean()))
    common = dict(leads=ens.leads, members=ens.n_members, protocol=PROTOCOL_INTEGRATED)
    return [
        MetricSeries(name="sia_rmse", values=sia_rmse, **common),
        MetricSeries(name="sie_rmse", values=sie_rmse, **common),
        MetricSeries(name="iiee", values=edge, mask="ocean" if max_radius is None else f"radius<={max_radius}", **common),
    ]


def soe_integrated(ens: HindcastSet, obs: ObsSet, quantity: str = "sie") -> MetricSeries:
    """
    SOE для интегральных рядов: участники против наблюдений по датам.
    """
    integrate = {"sia": sia, "sie": sie}.get(quantity)
    if integrate is None:
        raise MetricError(f"unknown integrated quantity '{quantity}'")
    members = ens.n_members
    if members < 2:
        raise MetricError("SOE requires at least two members")
    x, y = aligned_arrays(ens, obs)
    values = []
    for l, lead in enumerate(ens.leads):
        member_series = integrate(x[:, :, l], ens.grid)
        observed = integrate(y[:, l], ens.grid)
        variance = member_series.var(axis=1, ddof=1).mean()
        mse = ((member_series.mean(axis=1) - observed) ** 2).mean()
        if mse == 0:
            raise MetricError(f"zero {quantity} error at lead {lead}")
        values.append(float(np.sqrt((members + 1) / members * variance / mse)))
    return MetricSeries(name=f"soe_{quantity}", leads=ens.leads, values=values, members=members, protocol=PROTOCOL_INTEGRATED)


def spread_map(ens: HindcastSet, obs: ObsSet, target_month: int, lead: int, threshold: float = EDGE_THRESHOLD) -> SpreadMap:
    """
    Поклеточный разброс ансамбля для целевого месяца и частота наблюдаемого льда.

    Args:
        ens: Ансамбль
        obs: Наблюдения
        target_month: Календарный месяц действия прогноза
        lead: Заблаговременность
        threshold: Порог кромки

    Returns:
        SpreadMap: Средний разброс и частота SIC ≥ порога
    """
    if lead not in ens.leads:
        raise MetricError(f"lead {lead} not in dataset leads {ens.leads}")
    l = ens.leads.index(lead)
    times = [t for t, (_, month) in enumerate(ens.init_times) if (month + lead - 2) % 12 + 1 == target_month]
    if not times:
        raise MetricError(f"no initialisation time verifies in month {target_month} at lead {lead}")
    x, y = aligned_arrays(ens, obs)
    std = x[times, :, l].std(axis=1, ddof=1 if ens.n_members > 1 else 0).mean(axis=0)
    edge = (y[times, l] >= threshold).mean(axis=0)
    land = ens.grid.land_mask
    return SpreadMap(
        std=np.where(land, np.nan, std),
        edge_frequency=np.where(land, np.nan, edge),
        target_month=target_month,
        lead=lead,
        n_times=len(times),
    )
