"""
Модуль результатов верификации.
"""
import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict


PROTOCOL_SPATIAL = "area_weighted_spatial_mean_of_time_mean"
PROTOCOL_INTEGRATED = "time_statistic_of_domain_integral"
PROTOCOL_PATTERN = "time_mean_of_spatial_statistic"


class MetricSeries(BaseModel):
    """
    Значения метрики по заблаговременностям.
    """
    name: str
    leads: tuple[int, ...]
    values: list[float]
    members: int = pydantic.Field(..., description="Ensemble size M used")
    protocol: str = PROTOCOL_SPATIAL
    mask: str = "ocean"
    excluded: list[int] | None = pydantic.Field(None, description="Cells excluded per lead (zero-MSE cells for SOE)")

    def value(self, lead: int) -> float:
        return self.values[self.leads.index(lead)]


class SpectrumProfile(BaseModel):
    """
    Радиально усредненная спектральная плотность мощности.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rings: np.ndarray = pydantic.Field(..., description="Integer wavenumber ring index")
    power: np.ndarray = pydantic.Field(..., description="Mean |F|² over the ring")
    counts: np.ndarray = pydantic.Field(..., description="Number of Fourier coefficients per ring")

    @property
    def total_power(self) -> float:
        return float((self.power * self.counts).sum())


class SpectrumRatio(BaseModel):
    """
    Отношение спектра прогноза к спектру наблюдений с диапазоном по участникам.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rings: np.ndarray
    ratio: np.ndarray
    member_min: np.ndarray
    member_max: np.ndarray
    target_month: int
    lead: int
    n_times: int

    def high_frequency_mean(self, fraction: float = 1.0 / 3.0) -> float:
        """
        Среднее отношение по верхней доле колец (самые мелкие масштабы).
        """
        n = len(self.rings)
        start = n - max(1, int(round(n * fraction)))
        return float(np.nanmean(self.ratio[start:]))


class RankHistogram(BaseModel):
    """
    Гистограмма рангов наблюдения и ее функция распределения для одной заблаговременности.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    lead: int
    counts: np.ndarray = pydantic.Field(..., description="Counts over M+1 ranks")
    cdf: np.ndarray
    n_ranks: int
    empty: bool = False

    @property
    def max_deviation(self) -> float:
        """
        Наибольшее отклонение CDF от диагонали равномерного распределения.
        """
        n = len(self.counts)
        diagonal = np.arange(1, n + 1) / n
        return float(np.abs(self.cdf - diagonal).max())


class QuantilePairs(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    lead: int
    percentiles: np.ndarray
    forecast: np.ndarray
    observed: np.ndarray


class SpreadMap(BaseModel):
    """
    Карта среднего разброса ансамбля и частоты наблюдаемого льда (SIC ≥ порога).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    std: np.ndarray
    edge_frequency: np.ndarray
    target_month: int
    lead: int
    n_times: int
