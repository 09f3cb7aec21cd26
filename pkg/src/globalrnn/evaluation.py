__all__ = [
    "smape",
    "smape_modified",
    "mase",
    "aggregate",
    "rank_models",
    "evaluate_model",
    "metrics_table",
    "summary_table",
    "write_tsv",
]

import logging

from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from scipy.stats import rankdata

from globalrnn.constants import SMAPE_EPSILON
from globalrnn.exceptions import (
    AggregationError,
    ContractError,
    ShapeError,
    UndefinedMetricError,
)
from globalrnn.types import EvaluationReport, SeriesScore


logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


def _pair(forecast: ArrayLike, actual: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    forecast = np.asarray(forecast, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if forecast.size != actual.size:
        raise ShapeError(f"forecast has {forecast.size} steps, actual has {actual.size}")
    if forecast.size < 1:
        raise ContractError("cannot score an empty horizon")
    return forecast, actual


def smape(forecast: ArrayLike, actual: ArrayLike) -> float:
    """Symmetric MAPE in percent

    Raises:
    ------
        `UndefinedMetricError`: Forecast and actual are both zero at some step, use `smape_modified`.
    """
    forecast, actual = _pair(forecast, actual)
    denominator = (np.abs(actual) + np.abs(forecast)) / 2.0
    zero = np.flatnonzero(denominator == 0)
    if zero.size:
        raise UndefinedMetricError(
            f"SMAPE undefined at step(s) {(zero + 1).tolist()} where forecast and actual are 0, "
            "use the modified SMAPE"
        )
    return float(100.0 * np.mean(np.abs(forecast - actual) / denominator))


def smape_modified(
    forecast: ArrayLike,
    actual: ArrayLike,
    epsilon: float = SMAPE_EPSILON,
    halve: bool = True,
) -> float:
    """SMAPE with the denominator floored at 0.5 + epsilon

    `halve` keeps the division by two of the standard form.
    """
    forecast, actual = _pair(forecast, actual)
    denominator = np.maximum(np.abs(actual) + np.abs(forecast) + epsilon, 0.5 + epsilon)
    if halve:
        denominator = denominator / 2.0
    return float(100.0 * np.mean(np.abs(forecast - actual) / denominator))


def mase(forecast: ArrayLike, actual: ArrayLike, insample: ArrayLike, period: int = 1) -> float:
    """MAE scaled by the in-sample seasonal naive MAE

    Raises:
    ------
        `UndefinedMetricError`: The in-sample series repeats itself exactly every `period` steps.
    """
    forecast, actual = _pair(forecast, actual)
    insample = np.asarray(insample, dtype=np.float64).reshape(-1)
    if period < 1:
        raise ContractError(f"period must be >= 1, got {period}")
    if insample.size <= period:
        raise ContractError(f"in-sample length {insample.size} must exceed period {period}")
    scale = np.mean(np.abs(insample[period:] - insample[:-period]))
    if scale == 0:
        raise UndefinedMetricError(
            f"MASE undefined: in-sample seasonal naive error is 0 at period {period}"
        )
    return float(np.mean(np.abs(forecast - actual)) / scale)


def aggregate(values: Mapping[str, Optional[float]]) -> Tuple[float, float, int]:
    """Mean and median over the defined values, plus how many were skipped

    Raises:
    ------
        `AggregationError`: No series, or none with a defined value.
    """
    if not values:
        raise AggregationError("nothing to aggregate")
    defined = np.array([v for v in values.values() if v is not None], dtype=np.float64)
    skipped = len(values) - defined.size
    if defined.size == 0:
        raise AggregationError(f"all {len(values)} series have an undefined metric")
    return float(defined.mean()), float(np.median(defined)), skipped


def rank_models(tables: Mapping[str, Mapping[str, Optional[float]]]) -> Dict[str, float]:
    """Mean rank per model over the series, ties share the mean of their ranks

    A series where some model has no value is left out.

    Raises:
    ------
        `ContractError`: Models were scored on different series.
    """
    if not tables:
        raise ContractError("no models to rank")
    models = list(tables)
    series = set(tables[models[0]])
    for model in models[1:]:
        if set(tables[model]) != series:
            raise ContractError(
                f"'{model}' and '{models[0]}' cover different series: "
                f"{sorted(set(tables[model]) ^ series)}"
            )
    rows = [
        [tables[model][sid] for model in models]
        for sid in sorted(series)
        if all(tables[model][sid] is not None for model in models)
    ]
    if not rows:
        return {model: float("nan") for model in models}
    ranks = rankdata(np.array(rows, dtype=np.float64), method="average", axis=1)
    return dict(zip(models, ranks.mean(axis=0).astype(float).tolist()))


def _score(metric, *args, **kwargs) -> Optional[float]:
    try:
        return metric(*args, **kwargs)
    except UndefinedMetricError as e:
        logger.debug("%s", e)
        return None


def evaluate_model(
    label: str,
    forecasts: Mapping[str, np.ndarray],
    actuals: Mapping[str, np.ndarray],
    insample: Optional[Mapping[str, np.ndarray]] = None,
    period: int = 1,
    variant: str = "modified",
    halve: bool = True,
    epsilon: float = SMAPE_EPSILON,
) -> EvaluationReport:
    """Per series SMAPE and MASE of one model plus their aggregates

    Parameters:
    ----------
        - label (`str`): Model name used in every table.
        - forecasts (`Mapping[str, np.ndarray]`): Forecast per series id.
        - actuals (`Mapping[str, np.ndarray]`): True future per series id, same ids.
        - insample (`Optional[Mapping[str, np.ndarray]]`, optional): Observed history for MASE. (Defaults to `None`)
        - period (`int`, optional): Seasonal period of the MASE scale. (Defaults to `1`)
        - variant (`str`, optional): `"standard"` or `"modified"` SMAPE. (Defaults to `"modified"`)

    Raises:
    ------
        `ContractError`: Series ids of forecasts and actuals differ.
    """
    if set(forecasts) != set(actuals):
        raise ContractError(
            f"'{label}': forecast and actual ids differ: {sorted(set(forecasts) ^ set(actuals))}"
        )
    if variant not in ("standard", "modified"):
        raise ContractError(f"unknown SMAPE variant '{variant}'")
    per_series = {}
    for sid in actuals:
        if variant == "standard":
            smape_value = _score(smape, forecasts[sid], actuals[sid])
        else:
            smape_value = smape_modified(forecasts[sid], actuals[sid], epsilon, halve)
        mase_value = None
        if insample is not None and sid in insample:
            mase_value = _score(mase, forecasts[sid], actuals[sid], insample[sid], period)
        per_series[sid] = SeriesScore(smape=smape_value, mase=mase_value)

    report = EvaluationReport(model_label=label, per_series=per_series)
    mean, median, skipped = aggregate({sid: s.smape for sid, s in per_series.items()})
    report.aggregates.update(mean_smape=mean, median_smape=median)
    report.skipped["smape"] = skipped
    if insample is None:
        # MASE was not asked for, nothing is skipped
        report.aggregates.update(mean_mase=float("nan"), median_mase=float("nan"))
        report.skipped["mase"] = 0
    else:
        mean, median, skipped = aggregate({sid: s.mase for sid, s in per_series.items()})
        report.aggregates.update(mean_mase=mean, median_mase=median)
        report.skipped["mase"] = skipped
    if any(report.skipped.values()):
        logger.warning("'%s': skipped undefined metrics %s", label, report.skipped)
    return report


def metrics_table(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    rows = [
        {"model": r.model_label, "series": sid, "smape": s.smape, "mase": s.mase}
        for r in reports
        for sid, s in r.per_series.items()
    ]
    return pd.DataFrame(rows, columns=["model", "series", "smape", "mase"])


def summary_table(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    """One row per model with aggregates and mean ranks across models"""
    smape_ranks = rank_models(
        {r.model_label: {sid: s.smape for sid, s in r.per_series.items()} for r in reports}
    )
    mase_ranks = rank_models(
        {r.model_label: {sid: s.mase for sid, s in r.per_series.items()} for r in reports}
    )
    rows = [
        {
            "model": r.model_label,
            **{key: r.aggregates[key] for key in ("mean_smape", "median_smape", "mean_mase", "median_mase")},
            "mean_rank_smape": smape_ranks[r.model_label],
            "mean_rank_mase": mase_ranks[r.model_label],
            "skipped": sum(r.skipped.values()),
        }
        for r in reports
    ]
    return pd.DataFrame(rows)


def write_tsv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format="%.6f", na_rep="NA")
    return path
