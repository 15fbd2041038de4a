"""
Модуль климатологической коррекции среднего (Badj).

x'_{kjml} = x_{kjml} - x̄̄_{ml} + ȳ_{ml}, где x̄̄_{ml} и ȳ_{ml} - средние по
обучающим годам для календарного месяца инициализации m и заблаговременности l.
"""
import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict

from grid.enums import RoleTag
from grid.models import AdjustedEnsemble, GridSpec, HindcastSet, InitTime, ObsSet, Provenance, SampleSet
from grid.operations import ensemble_mean_array
from utils.exceptions import ClimatologyError, GridMismatchError
from utils.loggers import logger


Stratum = tuple[int, int] # (календарный месяц инициализации, заблаговременность)


class LeadClimatology(BaseModel):
    """
    Климатологии среднего по ансамблю и наблюдений для каждой страты (m, l).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    strata: tuple[Stratum, ...] = pydantic.Field(..., description="Ordered (init month, lead) strata")
    model_mean: np.ndarray = pydantic.Field(..., description="x̄̄_{ml}, shape [S, H, W], land = 0")
    obs_mean: np.ndarray = pydantic.Field(..., description="ȳ_{ml}, shape [S, H, W], land = 0")
    counts: tuple[int, ...] = pydantic.Field(..., description="Training years per stratum")
    train_span: tuple[InitTime, InitTime]

    def index(self, stratum: Stratum) -> int:
        try:
            return self.strata.index(stratum)
        except ValueError:
            raise ClimatologyError(f"no climatology for init month {stratum[0]}, lead {stratum[1]}") from None

    def bias(self, stratum: Stratum) -> np.ndarray:
        """
        x̄̄_{ml} - ȳ_{ml} для страты.
        """
        s = self.index(stratum)
        return self.model_mean[s] - self.obs_mean[s]


def fit_climatology(
    hindcast: HindcastSet | SampleSet,
    obs: ObsSet | None = None,
    pairs: list[tuple[int, int]] | None = None,
) -> LeadClimatology:
    """
    Климатологии по обучающим данным.

    Args:
        hindcast: Обучающие прогнозы или обучающая выборка (тогда берутся ее пары)
        obs: Согласованные наблюдения
        pairs: Пары (t, l); по умолчанию все

    Returns:
        LeadClimatology: Средние по стратам
    """
    if isinstance(hindcast, SampleSet):
        hindcast, obs, pairs = hindcast.hindcast, hindcast.obs, list(hindcast.pairs)
    if obs is None:
        raise ClimatologyError("climatology requires observations")
    obs.require_aligned(hindcast)
    if pairs is None:
        pairs = [(t, l) for t in range(len(hindcast.init_times)) for l in range(len(hindcast.leads))]

    ocean = hindcast.grid.ocean_mask
    x_mean = ensemble_mean_array(hindcast)
    y = np.where(ocean, obs.values, 0.0)

    months = sorted({month for _, month in hindcast.init_times})
    strata = [(month, lead) for month in months for lead in hindcast.leads]
    sums_x = {stratum: np.zeros(hindcast.grid.shape) for stratum in strata}
    sums_y = {stratum: np.zeros(hindcast.grid.shape) for stratum in strata}
    counts = dict.fromkeys(strata, 0)
    for t, l in pairs:
        stratum = (hindcast.init_times[t][1], hindcast.leads[l])
        sums_x[stratum] += x_mean[t, l]
        sums_y[stratum] += y[t, l]
        counts[stratum] += 1

    empty = [stratum for stratum in strata if counts[stratum] == 0]
    if empty:
        raise ClimatologyError(f"empty training strata (init month, lead): {empty}")

    used = sorted({t for t, _ in pairs})
    clim = LeadClimatology(
        grid=hindcast.grid,
        strata=tuple(strata),
        model_mean=np.stack([sums_x[s] / counts[s] for s in strata]),
        obs_mean=np.stack([sums_y[s] / counts[s] for s in strata]),
        counts=tuple(counts[s] for s in strata),
        train_span=(hindcast.init_times[used[0]], hindcast.init_times[used[-1]]),
    )
    logger.debug(f"climatology fitted on {len(pairs)} pairs, {len(strata)} strata, span {clim.train_span}")
    return clim


def badj_adjust(hindcast: HindcastSet, clim: LeadClimatology, clamp: bool = True) -> AdjustedEnsemble:
    """
    Сдвигает каждого участника на ȳ_{ml} - x̄̄_{ml}.

    Args:
        hindcast: Исходный ансамбль
        clim: Обучающие климатологии
        clamp: Ограничить результат отрезком [0, 1] после сдвига

    Returns:
        AdjustedEnsemble: Ансамбль с ролью badj
    """
    if not hindcast.grid.same_as(clim.grid):
        raise GridMismatchError("hindcast grid differs from the climatology grid")
    ocean = hindcast.grid.ocean_mask
    values = np.where(ocean, hindcast.values, 0.0)
    for t, (_, month) in enumerate(hindcast.init_times):
        for l, lead in enumerate(hindcast.leads):
            values[t, :, l] -= clim.bias((month, lead))
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    return AdjustedEnsemble(
        grid=hindcast.grid,
        init_times=hindcast.init_times,
        leads=hindcast.leads,
        values=values,
        role=RoleTag.badj,
        provenance=Provenance(
            role=RoleTag.badj,
            clamped=clamp,
            notes=f"climatology span {clim.train_span[0]}..{clim.train_span[1]}",
        ),
    )
