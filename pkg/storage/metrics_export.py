"""
Модуль экспорта результатов верификации.

Ряды метрик пишутся в CSV со столбцами (metric, lead, value, members,
protocol, mask) с 9 значащими цифрами или в JSON; спектры - в JSON.
"""
import json
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from metrics.models import MetricSeries, QuantilePairs, RankHistogram, SpectrumProfile, SpectrumRatio
from utils.exceptions import GridPackFormatError, MissingInputError


METRIC_COLUMNS = ["metric", "lead", "value", "members", "protocol", "mask"]
FLOAT_FORMAT = "%.9g"


def metrics_frame(series: list[MetricSeries]) -> pd.DataFrame:
    rows = [
        {"metric": item.name, "lead": lead, "value": value, "members": item.members, "protocol": item.protocol, "mask": item.mask}
        for item in series
        for lead, value in zip(item.leads, item.values)
    ]
    return pd.DataFrame(rows, columns=METRIC_COLUMNS)


def export_metrics(series: list[MetricSeries], path: Path | str, format: Literal["csv", "json"] = "csv") -> Path:
    """
    Записывает ряды метрик в CSV или JSON.

    Args:
        series: Ряды метрик
        path: Файл назначения
        format: csv или json

    Returns:
        Path: Записанный файл
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        metrics_frame(series).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    elif format == "json":
        payload = [item.model_dump(mode="json") for item in series]
        path.write_text(json.dumps(payload, indent=2, allow_nan=True), encoding="utf-8")
    else:
        raise ValueError(f"unknown metrics format '{format}'")
    return path


def import_metrics(path: Path | str) -> list[MetricSeries]:
    """
    Читает ряды метрик из CSV или JSON (по расширению файла).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"metrics file {path} does not exist")
    if path.suffix == ".json":
        return [MetricSeries.model_validate(item) for item in json.loads(path.read_text(encoding="utf-8"))]
    frame = pd.read_csv(path, keep_default_na=False, na_values=["nan", "NaN"])
    if list(frame.columns) != METRIC_COLUMNS:
        raise GridPackFormatError(f"metrics CSV header {list(frame.columns)} != {METRIC_COLUMNS}")
    series = []
    for (name, members, protocol, mask), group in frame.groupby(["metric", "members", "protocol", "mask"], sort=False):
        series.append(MetricSeries(
            name=name,
            leads=tuple(int(lead) for lead in group["lead"]),
            values=[float(value) for value in group["value"]],
            members=int(members),
            protocol=protocol,
            mask=mask,
        ))
    return series


def _array(values: np.ndarray) -> list:
    return [None if not np.isfinite(value) else float(value) for value in np.asarray(values, dtype=float)]


def export_spectra(profiles: dict[str, SpectrumProfile | SpectrumRatio], path: Path | str) -> Path:
    """
    Записывает профили RAPSD и их отношения в JSON (NaN как null).
    """
    payload = {}
    for name, item in profiles.items():
        if isinstance(item, SpectrumRatio):
            payload[name] = {
                "kind": "ratio",
                "target_month": item.target_month,
                "lead": item.lead,
                "n_times": item.n_times,
                "rings": [int(ring) for ring in item.rings],
                "ratio": _array(item.ratio),
                "member_min": _array(item.member_min),
                "member_max": _array(item.member_max),
                "envelope": "min-max over members",
            }
        else:
            payload[name] = {
                "kind": "profile",
                "rings": [int(ring) for ring in item.rings],
                "power": _array(item.power),
                "counts": [int(count) for count in item.counts],
            }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def export_rank_histograms(histograms: list[RankHistogram], path: Path | str) -> Path:
    rows = [
        {"lead": item.lead, "rank": rank, "count": count, "cdf": cdf, "n_ranks": item.n_ranks, "empty": item.empty}
        for item in histograms
        for rank, (count, cdf) in enumerate(zip(item.counts, item.cdf))
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def export_quantiles(pairs: list[QuantilePairs], path: Path | str) -> Path:
    rows = [
        {"lead": item.lead, "percentile": p, "forecast": f, "observed": o}
        for item in pairs
        for p, f, o in zip(item.percentiles, item.forecast, item.observed)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path
