"""
Модуль сводной верификации: полный набор метрик для ансамбля и таблица
сравнения нескольких ансамблей по заблаговременностям.
"""
import numpy as np
import pandas as pd

from configuration.run_config import EvaluationConfig
from grid.models import HindcastSet, ObsSet
from metrics.integrated import acc_and_pattern_corr, integrated_errors, soe_integrated
from metrics.models import PROTOCOL_INTEGRATED, PROTOCOL_PATTERN, MetricSeries
from metrics.scores import crps_metric, rmse_and_spread, soe
from utils.exceptions import MetricError
from utils.loggers import logger


REPORT_METRICS = ["crps", "rmse", "spread", "soe", "soe_sie", "sia_rmse", "sie_rmse", "iiee", "acc_sia", "pattern_corr"]


def _nan_series(name: str, ens: HindcastSet, protocol: str) -> MetricSeries:
    return MetricSeries(name=name, leads=ens.leads, values=[float("nan")] * len(ens.leads), members=ens.n_members, protocol=protocol)


def evaluate_suite(ens: HindcastSet, obs: ObsSet, cfg: EvaluationConfig | None = None) -> list[MetricSeries]:
    """
    Все скалярные метрики ансамбля по заблаговременностям.

    Ансамбль сокращается до cfg.members участников. Метрики, неопределенные
    на данных (нулевая дисперсия рядов аномалий), записываются как NaN.

    Args:
        ens: Ансамбль
        obs: Наблюдения
        cfg: Параметры верификации

    Returns:
        list: Ряды метрик
    """
    cfg = cfg or EvaluationConfig()
    ens = ens.with_members(min(cfg.members, ens.n_members))
    series = [crps_metric(ens, obs), *rmse_and_spread(ens, obs), soe(ens, obs)]
    try:
        series.append(soe_integrated(ens, obs, "sie"))
    except MetricError as error:
        logger.warning(f"soe_sie undefined: {error}")
        series.append(_nan_series("soe_sie", ens, PROTOCOL_INTEGRATED))
    series.extend(integrated_errors(ens, obs, cfg.iiee_max_radius))
    try:
        series.extend(acc_and_pattern_corr(ens, obs, "sia"))
    except MetricError as error:
        logger.warning(f"anomaly correlation undefined: {error}")
        series.append(_nan_series("acc_sia", ens, PROTOCOL_INTEGRATED))
        series.append(_nan_series("pattern_corr", ens, PROTOCOL_PATTERN))
    return series


def build_report(
    packs: dict[str, HindcastSet],
    obs: ObsSet,
    cfg: EvaluationConfig | None = None,
    reference: str | None = None,
) -> pd.DataFrame:
    """
    Таблица метрик: одна строка на (заблаговременность, ансамбль).

    Столбец crps_improvement - относительное улучшение CRPS
    (crps_ref - crps) / crps_ref по отношению к опорному ансамблю.

    Args:
        packs: Ансамбли по именам
        obs: Наблюдения
        cfg: Параметры верификации
        reference: Имя опорного ансамбля (по умолчанию последний)

    Returns:
        pd.DataFrame: Сводная таблица
    """
    if not packs:
        raise MetricError("no ensembles to report on")
    reference = reference or list(packs)[-1]
    if reference not in packs:
        raise MetricError(f"reference ensemble '{reference}' is not among {list(packs)}")
    rows = []
    for name, ens in packs.items():
        by_name = {item.name: item for item in evaluate_suite(ens, obs, cfg)}
        for l, lead in enumerate(ens.leads):
            row = {"lead": lead, "pack": name, "members": by_name["crps"].members}
            row.update({metric: by_name[metric].values[l] for metric in REPORT_METRICS})
            rows.append(row)
    frame = pd.DataFrame(rows)
    ref = frame[frame["pack"] == reference].set_index("lead")["crps"]
    frame["crps_improvement"] = (frame["lead"].map(ref) - frame["crps"]) / frame["lead"].map(ref)
    frame.loc[~np.isfinite(frame["crps_improvement"]), "crps_improvement"] = np.nan
    return frame.sort_values(["lead", "pack"], kind="stable").reset_index(drop=True)
