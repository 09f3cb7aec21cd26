__all__ = [
    "SeriesFormat",
    "ImputationPolicy",
    "DatasetManifest",
    "load_collection",
    "load_manifest",
    "impute_missing",
    "impute_collection",
    "split_train_validation",
    "synthetic_collection",
    "write_forecasts",
    "read_forecasts",
]

import csv
import json
import logging
import math

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from globalrnn.constants import DATASET_INFO, MISSING_MARKERS
from globalrnn.exceptions import (
    ImputationError,
    ManifestError,
    SeriesParseError,
    SplitError,
)
from globalrnn.types import SeriesCollection, SplitSeries, TimeSeries


logger = logging.getLogger(__name__)


class SeriesFormat(str, Enum):
    WIDE = "wide"
    LONG = "long"

    @classmethod
    def parse(cls, value: Union[str, "SeriesFormat"]) -> "SeriesFormat":
        aliases = {
            "one-row-per-series-csv": cls.WIDE,
            "one-row-per-series": cls.WIDE,
            "long-csv": cls.LONG,
        }
        if isinstance(value, cls):
            return value
        try:
            return aliases.get(value) or cls(value)
        except ValueError as e:
            raise ManifestError(f"unknown series file format '{value}'") from e


class ImputationPolicy(str, Enum):
    MEDIAN_BY_PHASE = "median-by-phase"
    ZERO_FILL = "zero-fill"


def _parse_value(text: str, row: int, column: int, path: Path) -> float:
    text = text.strip()
    if text in MISSING_MARKERS:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise SeriesParseError(
            f"{path}: row {row}, column {column}: '{text}' is not a number"
        ) from None
    if not math.isfinite(value):
        raise SeriesParseError(
            f"{path}: row {row}, column {column}: '{text}' is not finite"
        )
    return value


def _read_wide(path: Path) -> List[tuple]:
    """`id[,horizon],v1,v2,...` rows; a header line starting with `id` enables the horizon column"""
    rows = []
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        with_horizon = False
        for row_no, row in enumerate(reader, start=1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if row_no == 1 and row[0].strip().lower() == "id":
                with_horizon = len(row) > 1 and row[1].strip().lower() == "horizon"
                continue
            series_id = row[0].strip()
            if not series_id:
                raise SeriesParseError(f"{path}: row {row_no}, column 1: empty series id")
            horizon = None
            first = 1
            if with_horizon:
                first = 2
                cell = row[1].strip() if len(row) > 1 else ""
                if cell:
                    try:
                        horizon = int(cell)
                    except ValueError:
                        raise SeriesParseError(
                            f"{path}: row {row_no}, column 2: horizon '{cell}' is not an integer"
                        ) from None
            values = [
                _parse_value(text, row_no, col, path)
                for col, text in enumerate(row[first:], start=first + 1)
            ]
            if not values:
                raise SeriesParseError(f"{path}: row {row_no}: series '{series_id}' has no values")
            rows.append((series_id, horizon, values))
    return rows


def _read_long(path: Path) -> List[tuple]:
    """`id,value[,horizon]` rows in time order per id"""
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        return []
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    for column in ("id", "value"):
        if column not in frame.columns:
            raise SeriesParseError(f"{path}: missing '{column}' column")
    value_col = list(frame.columns).index("value") + 1
    values = [
        _parse_value(text, row_no, value_col, path)
        for row_no, text in enumerate(frame["value"], start=2)
    ]
    frame = frame.assign(value=values)
    rows = []
    for series_id, group in frame.groupby("id", sort=False):
        horizon = None
        if "horizon" in group.columns:
            marks = {h.strip() for h in group["horizon"] if h.strip()}
            if len(marks) > 1:
                raise SeriesParseError(f"{path}: series '{series_id}' has several horizons {sorted(marks)}")
            if marks:
                horizon = int(marks.pop())
        rows.append((str(series_id), horizon, group["value"].to_list()))
    return rows


def load_collection(
    path: Union[str, Path],
    format: Union[str, SeriesFormat] = SeriesFormat.WIDE,
    period: int = 1,
    horizon: int = 1,
    integer_valued: bool = False,
    start_index: int = 0,
    name: Optional[str] = None,
) -> SeriesCollection:
    """Load a series collection, keeping missing values as NaN

    Parameters:
    ----------
        - path (`Union[str, Path]`): CSV file.
        - format (`Union[str, SeriesFormat]`, optional): `wide` (one row per series) or `long`. (Defaults to `wide`)
        - period (`int`, optional): Seasonality period shared by all series. (Defaults to `1`)
        - horizon (`int`, optional): Collection horizon, overridden per series by a horizon column. (Defaults to `1`)

    Raises:
    ------
        `FileNotFoundError`: `path` is missing.
        `SeriesParseError`: Malformed field or empty file.
        `SeriesValidationError`: Duplicate id.

    Returns:
    -------
        `SeriesCollection`
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    fmt = SeriesFormat.parse(format)
    rows = _read_wide(path) if fmt is SeriesFormat.WIDE else _read_long(path)
    if not rows:
        raise SeriesParseError(f"{path}: no series found")
    series = [
        TimeSeries(
            id=series_id,
            values=np.asarray(values, dtype=np.float64),
            period=period,
            horizon=own_horizon or horizon,
            start_index=start_index,
            integer_valued=integer_valued,
        )
        for series_id, own_horizon, values in rows
    ]
    logger.debug("Loaded %d series from %s", len(series), path)
    return SeriesCollection(
        name=name or path.stem,
        series=series,
        horizon=horizon,
        period=period,
        integer_valued=integer_valued,
    )


@dataclass
class DatasetManifest:
    name: str
    files: List[Path]
    period: int = 1
    horizon: int = 1
    integer_valued: bool = False
    format: SeriesFormat = SeriesFormat.WIDE
    imputation: Optional[ImputationPolicy] = None
    start_index: int = 0
    preset: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def load(self) -> SeriesCollection:
        """Read every file, concatenate in manifest order and impute"""
        series = []
        for file in self.files:
            part = load_collection(
                file,
                format=self.format,
                period=self.period,
                horizon=self.horizon,
                integer_valued=self.integer_valued,
                start_index=self.start_index,
            )
            series.extend(part.series)
        collection = SeriesCollection(
            name=self.name,
            series=series,
            horizon=self.horizon,
            period=self.period,
            integer_valued=self.integer_valued,
        )
        if self.imputation is not None:
            collection = impute_collection(collection, self.imputation)
        return collection


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Read a dataset manifest JSON

    Relative file names resolve against the manifest directory. `period` and
    `horizon` default to the named dataset's values when `preset` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"'{path}' is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"'{path}' must hold a JSON object")
    for key in ("name", "files"):
        if key not in data:
            raise ManifestError(f"'{path}' lacks required field '{key}'")
    preset = data.get("preset")
    default_horizon, default_period = DATASET_INFO.get(
        (preset or "").split("_")[0], (None, None)
    )
    period = data.get("period", default_period)
    horizon = data.get("horizon", default_horizon)
    if period is None or horizon is None:
        raise ManifestError(f"'{path}' needs 'period' and 'horizon'")
    files = [
        f if f.is_absolute() else path.parent / f
        for f in map(Path, data["files"])
    ]
    for file in files:
        if not file.is_file():
            raise FileNotFoundError(file)
    try:
        return DatasetManifest(
            name=str(data["name"]),
            files=files,
            period=int(period),
            horizon=int(horizon),
            integer_valued=bool(data.get("integer_valued", False)),
            format=SeriesFormat.parse(data.get("format", SeriesFormat.WIDE.value)),
            imputation=(
                ImputationPolicy(data["imputation"]) if data.get("imputation") else None
            ),
            start_index=int(data.get("start_index", 0)),
            preset=preset,
            extra={k: v for k, v in data.items() if k not in DatasetManifest.__dataclass_fields__},
        )
    except ValueError as e:
        raise ManifestError(f"'{path}': {e}") from e


def impute_missing(
    series: TimeSeries, policy: Union[str, ImputationPolicy] = ImputationPolicy.MEDIAN_BY_PHASE
) -> TimeSeries:
    """Replace missing values

    `median-by-phase` uses the median of the observed values sharing the
    phase `(start_index + i) mod period`; `zero-fill` writes 0.

    Raises:
    ------
        `ImputationError`: A phase with a missing value has no observation.
    """
    policy = ImputationPolicy(policy)
    if not series.has_missing:
        return series
    values = series.values.copy()
    missing = np.isnan(values)
    if policy is ImputationPolicy.ZERO_FILL:
        values[missing] = 0.0
        return series.with_values(values)
    phases = series.phases()
    for phase in np.unique(phases[missing]):
        members = phases == phase
        observed = values[members & ~missing]
        if observed.size == 0:
            raise ImputationError(
                f"series '{series.id}': phase {int(phase)} has no observed value"
            )
        values[members & missing] = np.median(observed)
    return series.with_values(values)


def impute_collection(
    collection: SeriesCollection, policy: Union[str, ImputationPolicy]
) -> SeriesCollection:
    imputed = [impute_missing(item, policy) for item in collection]
    filled = sum(int(np.isnan(item.values).sum()) for item in collection)
    if filled:
        logger.info("Imputed %d missing values in '%s' (%s)", filled, collection.name, ImputationPolicy(policy).value)
    return collection.subset(imputed)


def split_train_validation(series: TimeSeries) -> SplitSeries:
    """Reserve the last `horizon` values for validation"""
    if len(series) <= series.horizon:
        raise SplitError(
            f"series '{series.id}': length {len(series)} must exceed horizon {series.horizon}"
        )
    cut = len(series) - series.horizon
    return SplitSeries(
        train=series.values[:cut].copy(), validation_target=series.values[cut:].copy()
    )


def synthetic_collection(
    n_series: int = 100,
    length: int = 120,
    period: int = 12,
    horizon: int = 12,
    noise: float = 0.1,
    aligned: bool = True,
    seed: int = 0,
    name: Optional[str] = None,
) -> SeriesCollection:
    """Positive sine series with random level, amplitude and (optionally) phase

    Noise is multiplicative log-normal with standard deviation `noise`, so
    every value stays positive. `aligned=True` puts every series on the same
    seasonal phase.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    series = []
    for index in range(n_series):
        level = rng.uniform(50.0, 150.0)
        amplitude = rng.uniform(0.2, 0.8)
        phase = 0.0 if aligned else rng.uniform(0.0, period)
        clean = level * (1.0 + amplitude * np.sin(2.0 * np.pi * (t + phase) / period))
        values = clean * np.exp(noise * rng.standard_normal(length))
        series.append(
            TimeSeries(id=f"S{index + 1:03d}", values=values, period=period, horizon=horizon)
        )
    return SeriesCollection(
        name=name or ("synthetic" if aligned else "synthetic_shifted"),
        series=series,
        horizon=horizon,
        period=period,
    )


def write_forecasts(path: Union[str, Path], forecasts: Mapping[str, np.ndarray]) -> Path:
    """`id,f1,...,fH` rows in the given series order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width = max((len(v) for v in forecasts.values()), default=0)
    frame = pd.DataFrame(
        [list(np.asarray(v, dtype=np.float64)) for v in forecasts.values()],
        index=pd.Index(list(forecasts), name="id"),
        columns=[f"f{k}" for k in range(1, width + 1)],
    )
    frame.to_csv(path, float_format="%.10g", na_rep="")
    return path


def read_forecasts(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Read an `id,f1,...,fH` table (header optional), short rows padded at the end

    Raises:
    ------
        `FileNotFoundError`: `path` is missing.
        `SeriesParseError`: A gap inside a row or no rows at all.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    forecasts = {}
    for series_id, _, values in _read_wide(path):
        values = np.asarray(values, dtype=np.float64)
        present = np.flatnonzero(~np.isnan(values))
        values = values[: present[-1] + 1] if present.size else values[:0]
        if np.isnan(values).any() or values.size == 0:
            raise SeriesParseError(f"{path}: series '{series_id}' has missing forecast steps")
        if series_id in forecasts:
            raise SeriesParseError(f"{path}: series '{series_id}' appears twice")
        forecasts[series_id] = values
    if not forecasts:
        raise SeriesParseError(f"{path}: no forecasts found")
    return forecasts
