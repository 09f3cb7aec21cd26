__all__ = [
    "log_transform",
    "mean_scale",
    "loess_smooth",
    "stl_periodic",
    "seasonality_strength",
    "series_seasonality_strength",
    "choose_input_window_size",
    "collection_input_window_size",
    "build_windows",
    "build_sequence",
    "trend_normalize",
    "preprocess_series",
    "preprocess_collection",
    "forward_future",
    "postprocess_forecast",
]

import logging
import math

from typing import List, Optional, Tuple, Union

import numpy as np

from statsmodels.nonparametric.smoothers_lowess import lowess

from globalrnn.constants import (
    INPUT_WINDOW_FACTOR,
    LOG_EPSILON_COUNT,
    LOG_EPSILON_REAL,
    STL_INNER_ITERATIONS,
)
from globalrnn.exceptions import (
    ContractError,
    DomainError,
    NumericError,
    ScalingError,
    ShapeError,
    SizingError,
)
from globalrnn.types import (
    Decomposition,
    NormalizationRecord,
    Pipeline,
    SeriesCollection,
    Stage,
    TimeSeries,
    WindowBlock,
    WindowSet,
    WindowVariant,
)
from globalrnn.utils import round_half_away


logger = logging.getLogger(__name__)


def log_transform(values: np.ndarray, epsilon: float) -> Tuple[np.ndarray, int]:
    """Natural log, or log(v + 1) when the series gets as low as `epsilon`

    Returns:
    -------
        `Tuple[np.ndarray, int]`: Transformed values and the log offset (0 or 1).
    """
    values = np.asarray(values, dtype=np.float64)
    if np.isnan(values).any():
        raise DomainError("log transform got missing values, impute first")
    if (values < 0).any():
        raise DomainError(f"log transform needs non-negative values, min is {values.min()}")
    if values.min() > epsilon:
        return np.log(values), 0
    return np.log(values + 1.0), 1


def mean_scale(values: np.ndarray) -> Tuple[np.ndarray, float]:
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if not mean > 0:
        raise ScalingError(f"mean scaling needs a positive mean, got {mean}")
    return values / mean, mean


def _next_odd(value: float) -> int:
    n = int(math.ceil(value))
    return n if n % 2 else n + 1


def loess_smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Degree 1 tricube Loess over `window` nearest neighbours, no robustness passes"""
    values = np.asarray(values, dtype=np.float64)
    size = values.size
    if size < 3:
        return values.copy()
    frac = min(window, size) / size
    x = np.arange(size, dtype=np.float64)
    return np.asarray(
        lowess(values, x, frac=frac, it=0, delta=0.0, is_sorted=True, return_sorted=False),
        dtype=np.float64,
    )


def stl_periodic(values: np.ndarray, period: int) -> Decomposition:
    """Additive STL with a periodic seasonal window

    With a periodic window the cycle-subseries smoother is the per-phase mean
    and the low-pass filter of an exactly periodic series is its cycle mean,
    so the inner loop reduces to: detrend, average per phase, centre, then
    re-fit the trend on the deseasonalized series. Series shorter than two
    periods get no seasonal component.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise NumericError("STL decomposition needs finite values")
    if period < 1:
        raise ContractError(f"period must be >= 1, got {period}")
    size = values.size
    trend_window = max(3, _next_odd(1.5 * period))
    seasonal = np.zeros(size)
    if period == 1 or size < 2 * period:
        trend = loess_smooth(values, trend_window)
    else:
        phases = np.arange(size) % period
        counts = np.bincount(phases, minlength=period)
        trend = np.zeros(size)
        for _ in range(STL_INNER_ITERATIONS):
            detrended = values - trend
            cycle = np.bincount(phases, weights=detrended, minlength=period) / counts
            seasonal = (cycle - cycle.mean())[phases]
            trend = loess_smooth(values - seasonal, trend_window)
    remainder = values - seasonal - trend
    return Decomposition(seasonal=seasonal, trend=trend, remainder=remainder, period=period)


def seasonality_strength(decomposition: Decomposition) -> float:
    """max(0, 1 - var(remainder) / var(seasonal + remainder))"""
    detrended = decomposition.seasonal + decomposition.remainder
    total = float(np.var(detrended))
    if total == 0.0:
        return 0.0
    return max(0.0, 1.0 - float(np.var(decomposition.remainder)) / total)


def _feasible(length: int, horizon: int, m: int) -> bool:
    return m >= 1 and length - 2 * horizon - m >= 1


def choose_input_window_size(
    horizon: int,
    period: int,
    length: int,
    variant: Union[str, WindowVariant] = WindowVariant.SMALL,
) -> int:
    """Input window size: 1.25 times the horizon or 1.25 times the period

    `small` tries the smaller of the two first, `large` the larger. When
    neither leaves room for one training block, the largest m that does is
    used.

    Raises:
    ------
        `SizingError`: The series cannot hold even a single training block.
    """
    if length <= 0:
        raise SizingError(f"series length must be positive, got {length}")
    options = sorted(
        {
            math.ceil(INPUT_WINDOW_FACTOR * horizon),
            math.ceil(INPUT_WINDOW_FACTOR * period),
        }
    )
    if WindowVariant(variant) is WindowVariant.LARGE:
        options.reverse()
    for m in options:
        if _feasible(length, horizon, m):
            return m
    fallback = length - 2 * horizon - 1
    if fallback >= 1:
        logger.debug(
            "Input window options %s do not fit length %d, using %d", options, length, fallback
        )
        return fallback
    raise SizingError(
        f"length {length} admits no input window for horizon {horizon}, "
        f"need at least {2 * horizon + 2}"
    )


def collection_input_window_size(
    collection: SeriesCollection, variant: Union[str, WindowVariant] = WindowVariant.SMALL
) -> int:
    """One input window size that fits every series of a global model"""
    shortest = min(len(item) for item in collection)
    return choose_input_window_size(collection.horizon, collection.period, shortest, variant)


def _block_starts(length: int, m: int, n: int, stage: Stage, context: bool) -> range:
    if stage is Stage.TRAIN:
        count, minimum = length - 2 * n - m, 2 * n + m + 1
    elif stage in (Stage.VALIDATION, Stage.REFIT):
        count, minimum = length - n - m, n + m + 1
    elif context:
        count, minimum = length - m, m + 1
    else:
        if length < m:
            raise SizingError(f"test stage needs length >= {m}, got {length}")
        return range(length - m, length - m + 1)
    if count < 1:
        raise SizingError(
            f"{stage.value} stage needs length >= {minimum} for m={m}, n={n}, got {length}"
        )
    return range(1, count + 1)


def build_windows(
    values: np.ndarray,
    m: int,
    n: int,
    stage: Union[str, Stage],
    series_id: str = "",
    context: bool = False,
) -> WindowSet:
    """Moving (m input, n output) blocks, shifted by one step

    `values` is the whole series of length l. Blocks are anchored at the end
    of the usable region:

        - train: l - 2n - m blocks, the last target ends where the validation part starts.
        - validation: l - n - m blocks, the last input ends there; targets that
          would reach into the validation part are left out.
        - refit: l - n - m blocks over the whole series.
        - test: the final input window only (every input window with `context`).

    Blocks carry no normalization record yet.
    """
    values = np.asarray(values, dtype=np.float64)
    stage = Stage(stage)
    length = values.size
    if m < 1 or n < 1:
        raise ContractError(f"window sizes must be positive, got m={m}, n={n}")
    target_end = length - n if stage in (Stage.TRAIN, Stage.VALIDATION) else length
    blocks = []
    for start in _block_starts(length, m, n, stage, context):
        stop = start + m
        target = None
        if stage is not Stage.TEST and stop + n <= target_end:
            target = values[stop : stop + n].copy()
        blocks.append(WindowBlock(input=values[start:stop].copy(), target=target, start=start))
    return WindowSet(series_id=series_id, blocks=blocks, m=m, n=n, stage=stage, moving_window=True)


def build_sequence(
    values: np.ndarray, n: int, stage: Union[str, Stage], series_id: str = ""
) -> WindowSet:
    """Single block holding the stage's whole sequence as scalar steps"""
    values = np.asarray(values, dtype=np.float64)
    stage = Stage(stage)
    length = values.size
    if stage is Stage.TRAIN:
        inputs, target = values[: length - 2 * n], values[length - 2 * n : length - n]
    elif stage is Stage.VALIDATION:
        inputs, target = values[: length - n], None
    elif stage is Stage.REFIT:
        inputs, target = values[: length - n], values[length - n :]
    else:
        inputs, target = values, None
    if inputs.size < 1:
        minimum = 2 * n + 1 if stage is Stage.TRAIN else n + 1
        raise SizingError(f"{stage.value} stage needs length >= {minimum} for n={n}, got {length}")
    block = WindowBlock(
        input=inputs.copy(), target=None if target is None else target.copy(), start=0
    )
    return WindowSet(series_id=series_id, blocks=[block], m=1, n=n, stage=stage, moving_window=False)


def trend_normalize(
    block: WindowBlock, decomposition: Decomposition, n: int, log_offset: int = 0
) -> WindowBlock:
    """Subtract the trend at the block's last input step from input and target

    The block holds deseasonalized values. Its record keeps the anchor and the
    seasonal component of the `n` steps after the input.
    """
    last = block.start + block.input.size - 1
    if not 0 <= last < len(decomposition):
        raise ContractError(
            f"input ends at {last}, outside the decomposition of length {len(decomposition)}"
        )
    anchor = float(decomposition.trend[last])
    record = NormalizationRecord(
        pipeline=Pipeline.STL,
        log_offset=log_offset,
        trend_anchor=anchor,
        seasonal_future=decomposition.seasonal_at(last + 1, n),
    )
    return WindowBlock(
        input=block.input - anchor,
        target=None if block.target is None else block.target - anchor,
        record=record,
        start=block.start,
    )


def _log_epsilon(integer_valued: bool) -> float:
    return LOG_EPSILON_COUNT if integer_valued else LOG_EPSILON_REAL


def series_seasonality_strength(series: TimeSeries) -> float:
    """Seasonality strength of the whole log series"""
    try:
        logged, _ = log_transform(series.values, _log_epsilon(series.integer_valued))
        return seasonality_strength(stl_periodic(logged, series.period))
    except (DomainError, NumericError) as e:
        raise type(e)(f"series '{series.id}': {e}") from e


def preprocess_series(
    series: TimeSeries,
    pipeline: Union[str, Pipeline],
    m: int,
    n: Optional[int] = None,
    stage: Union[str, Stage] = Stage.TRAIN,
    moving_window: bool = True,
    context: bool = False,
) -> WindowSet:
    """Forward transforms and windowing of one series

    STL: log, periodic STL, deseasonalize, then trend-normalize each block.
    NOSTL: divide by the mean, then log.
    Train and validation stages only look at the training part of the series.
    """
    pipeline, stage = Pipeline(pipeline), Stage(stage)
    n = n or series.horizon
    if series.has_missing:
        raise DomainError(f"series '{series.id}' still has missing values")
    values = series.values
    used = values[: len(values) - n] if stage in (Stage.TRAIN, Stage.VALIDATION) else values
    if used.size < 1:
        raise SizingError(f"series '{series.id}': nothing left after reserving {n} steps")
    tail = np.full(values.size - used.size, np.nan)
    epsilon = _log_epsilon(series.integer_valued)

    try:
        if pipeline is Pipeline.NOSTL:
            scaled, mean = mean_scale(used)
            logged, offset = log_transform(scaled, epsilon)
            record = NormalizationRecord(pipeline=Pipeline.NOSTL, log_offset=offset, series_mean=mean)
            full = np.concatenate([logged, tail])
            windows = (
                build_windows(full, m, n, stage, series.id, context)
                if moving_window
                else build_sequence(full, n, stage, series.id)
            )
            for block in windows.blocks:
                block.record = record
        else:
            logged, offset = log_transform(used, epsilon)
            decomposition = stl_periodic(logged, series.period)
            full = np.concatenate([decomposition.deseasonalized, tail])
            windows = (
                build_windows(full, m, n, stage, series.id, context)
                if moving_window
                else build_sequence(full, n, stage, series.id)
            )
            windows.blocks = [
                trend_normalize(block, decomposition, n, offset) for block in windows.blocks
            ]
    except (DomainError, ScalingError, SizingError) as e:
        raise type(e)(f"series '{series.id}': {e}") from e
    windows.integer_valued = series.integer_valued
    return windows


def preprocess_collection(
    collection: SeriesCollection,
    pipeline: Union[str, Pipeline],
    m: int,
    stage: Union[str, Stage] = Stage.TRAIN,
    moving_window: bool = True,
    context: bool = False,
) -> List[WindowSet]:
    return [
        preprocess_series(item, pipeline, m, item.horizon, stage, moving_window, context)
        for item in collection
    ]


def forward_future(future: np.ndarray, record: NormalizationRecord) -> np.ndarray:
    """Push true future values through the transforms described by `record`"""
    future = np.asarray(future, dtype=np.float64)
    _check_record(record, future.size)
    if record.pipeline is Pipeline.STL:
        return np.log(future + record.log_offset) - record.seasonal_future - record.trend_anchor
    return np.log(future / record.series_mean + record.log_offset)


def _check_record(record: NormalizationRecord, size: int) -> None:
    if record.pipeline is Pipeline.STL:
        if record.trend_anchor is None or record.seasonal_future is None:
            raise ContractError("STL record lacks trend_anchor or seasonal_future")
        if record.seasonal_future.size != size:
            raise ShapeError(
                f"forecast has {size} steps, seasonal_future has {record.seasonal_future.size}"
            )
    elif record.series_mean is None:
        raise ContractError("NOSTL record lacks series_mean")


def postprocess_forecast(
    raw: np.ndarray, record: NormalizationRecord, integer_valued: bool = False
) -> np.ndarray:
    """Reverse every forward transform on a network forecast

    STL: add trend anchor, add seasonal, exp, minus offset, round, clip.
    NOSTL: exp, minus offset, times series mean, round, clip.
    """
    raw = np.asarray(raw, dtype=np.float64)
    _check_record(record, raw.size)
    if record.pipeline is Pipeline.STL:
        values = np.exp(raw + record.trend_anchor + record.seasonal_future) - record.log_offset
    else:
        values = (np.exp(raw) - record.log_offset) * record.series_mean
    if integer_valued:
        values = round_half_away(values)
    return np.maximum(values, 0.0) + 0.0
