import math

import numpy as np
import pytest

from globalrnn.exceptions import (
    ContractError,
    DomainError,
    NumericError,
    ScalingError,
    ShapeError,
    SizingError,
)
from globalrnn.preprocess import (
    build_sequence,
    build_windows,
    choose_input_window_size,
    forward_future,
    log_transform,
    mean_scale,
    postprocess_forecast,
    preprocess_series,
    seasonality_strength,
    series_seasonality_strength,
    stl_periodic,
    trend_normalize,
)
from globalrnn.types import (
    Decomposition,
    NormalizationRecord,
    Pipeline,
    Stage,
    TimeSeries,
    WindowBlock,
)


def seasonal_series(length=60, period=12, level=100.0, amplitude=0.3, horizon=6):
    t = np.arange(length)
    values = level * (1.0 + amplitude * np.sin(2.0 * np.pi * t / period))
    return TimeSeries(id="sine", values=values, period=period, horizon=horizon)


def test_log_transform():
    logged, offset = log_transform([math.e, math.e**2], 0.001)
    np.testing.assert_allclose(logged, [1.0, 2.0])
    assert offset == 0
    logged, offset = log_transform([0.0, 1.0], 0.0)
    np.testing.assert_allclose(logged, [0.0, 0.6931471805599453])
    assert offset == 1
    with pytest.raises(DomainError):
        log_transform([-1.0, 2.0], 0.0)


def test_mean_scale():
    scaled, mean = mean_scale([2.0, 4.0])
    np.testing.assert_allclose(scaled, [2 / 3, 4 / 3])
    assert mean == 3.0
    scaled, mean = mean_scale([5.0, 5.0, 5.0])
    np.testing.assert_array_equal(scaled, [1.0, 1.0, 1.0])
    assert mean == 5.0
    with pytest.raises(ScalingError):
        mean_scale([0.0, 0.0])


def test_stl_constant():
    decomposition = stl_periodic(np.full(48, 3.5), 12)
    np.testing.assert_allclose(decomposition.seasonal, 0.0, atol=1e-12)
    np.testing.assert_allclose(decomposition.trend, 3.5)
    np.testing.assert_allclose(decomposition.remainder, 0.0, atol=1e-12)


def test_stl_sinusoid():
    t = np.arange(240)
    values = 5.0 + 2.0 * np.sin(2.0 * np.pi * t / 12)
    decomposition = stl_periodic(values, 12)
    assert np.abs(decomposition.remainder).max() < 1e-6 * 2.0
    reconstructed = decomposition.seasonal + decomposition.trend + decomposition.remainder
    np.testing.assert_allclose(reconstructed, values)
    assert seasonality_strength(decomposition) > 0.99


def test_stl_random_series():
    rng = np.random.default_rng(3)
    for _ in range(200):
        period = int(rng.choice([1, 4, 7, 12]))
        size = int(rng.integers(3, 121))
        t = np.arange(size)
        values = (
            rng.uniform(-5.0, 5.0)
            + rng.uniform(-0.05, 0.05) * t
            + rng.uniform(0.0, 2.0) * np.sin(2.0 * np.pi * t / period + rng.uniform(0.0, 6.0))
            + rng.normal(scale=rng.uniform(0.01, 1.0), size=size)
        )
        decomposition = stl_periodic(values, period)
        reconstructed = decomposition.seasonal + decomposition.trend + decomposition.remainder
        np.testing.assert_allclose(reconstructed, values, rtol=0.0, atol=1e-8)
        seasonal = decomposition.seasonal
        if period == 1 or size < 2 * period:
            np.testing.assert_array_equal(seasonal, np.zeros(size))
        else:
            np.testing.assert_array_equal(seasonal[period:], seasonal[:-period])
        assert 0.0 <= seasonality_strength(decomposition) <= 1.0


def test_series_seasonality_strength():
    assert series_seasonality_strength(seasonal_series(length=96)) > 0.99
    flat = TimeSeries(id="flat", values=np.exp(np.random.default_rng(8).normal(size=96)), period=12)
    assert series_seasonality_strength(flat) < 0.5
    with pytest.raises(DomainError, match="'neg'"):
        series_seasonality_strength(TimeSeries(id="neg", values=[1.0, -2.0, 3.0], period=1))


def test_stl_short_series_has_no_seasonality():
    decomposition = stl_periodic(np.arange(10, dtype=float), 12)
    np.testing.assert_array_equal(decomposition.seasonal, np.zeros(10))


def test_stl_rejects_non_finite():
    with pytest.raises(NumericError):
        stl_periodic([1.0, np.inf, 2.0], 1)


def test_input_window_size():
    assert choose_input_window_size(56, 7, 400) == 9
    assert choose_input_window_size(56, 7, 400, "large") == 70
    assert choose_input_window_size(12, 12, 100) == 15
    # short horizon 6 series: neither 8 nor 15 fits, largest feasible is used
    assert choose_input_window_size(6, 12, 20) == 7
    with pytest.raises(SizingError):
        choose_input_window_size(6, 12, 13)


def test_block_counts():
    values = np.arange(100, dtype=float)
    train = build_windows(values, 10, 7, Stage.TRAIN)
    assert len(train) == 76
    assert all(block.target is not None for block in train.blocks)
    # last training target ends where the validation part starts
    assert train.last.target[-1] == 92.0
    validation = build_windows(values, 10, 7, Stage.VALIDATION)
    assert len(validation) == 83
    assert validation.last.input[-1] == 92.0
    assert validation.last.target is None
    assert len(build_windows(values, 10, 7, Stage.REFIT)) == 83
    test = build_windows(values, 10, 7, Stage.TEST)
    assert len(test) == 1
    np.testing.assert_array_equal(test.last.input, np.arange(90, 100))


def test_block_counts_random():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        m = int(rng.integers(1, 30))
        n = int(rng.integers(1, 30))
        length = int(rng.integers(2 * n + m + 1, 2 * n + m + 80))
        values = np.arange(length, dtype=float)
        assert len(build_windows(values, m, n, Stage.TRAIN)) == length - 2 * n - m
        assert len(build_windows(values, m, n, Stage.VALIDATION)) == length - n - m
        assert len(build_windows(values, m, n, Stage.TEST)) == 1


def test_block_count_too_short():
    with pytest.raises(SizingError, match="length >= 18"):
        build_windows(np.arange(17, dtype=float), 10, 7, Stage.VALIDATION)


def test_build_sequence():
    values = np.arange(20, dtype=float)
    train = build_sequence(values, 4, Stage.TRAIN)
    assert (len(train), train.m) == (1, 1)
    np.testing.assert_array_equal(train.last.input, np.arange(12))
    np.testing.assert_array_equal(train.last.target, [12, 13, 14, 15])
    refit = build_sequence(values, 4, Stage.REFIT)
    np.testing.assert_array_equal(refit.last.target, [16, 17, 18, 19])


def test_trend_normalize():
    decomposition = Decomposition(
        seasonal=np.zeros(5),
        trend=np.array([10.0, 11.0, 12.0, 13.0, 14.0]),
        remainder=np.zeros(5),
        period=1,
    )
    block = WindowBlock(input=np.array([10.0, 11.0, 12.0]), target=np.array([13.0, 14.0]))
    normalized = trend_normalize(block, decomposition, 2)
    np.testing.assert_array_equal(normalized.input, [-2.0, -1.0, 0.0])
    np.testing.assert_array_equal(normalized.target, [1.0, 2.0])
    assert normalized.record.trend_anchor == 12.0


def test_trend_normalize_translation_invariant():
    ones = np.ones(6)
    block = WindowBlock(input=np.array([0.2, -0.1, 0.3]), target=None)
    first = trend_normalize(
        WindowBlock(input=block.input + 4.0, target=None),
        Decomposition(np.zeros(6), 4.0 * ones, np.zeros(6), 1),
        2,
    )
    second = trend_normalize(
        WindowBlock(input=block.input + 9.0, target=None),
        Decomposition(np.zeros(6), 9.0 * ones, np.zeros(6), 1),
        2,
    )
    np.testing.assert_allclose(first.input, second.input)


def test_preprocess_stl_test_stage():
    series = seasonal_series()
    windows = preprocess_series(series, Pipeline.STL, 8, stage=Stage.TEST)
    assert len(windows) == 1
    assert windows.last.target is None
    assert windows.last.record.seasonal_future.size == 6


def test_preprocess_nostl():
    series = TimeSeries(id="a", values=[2.0, 4.0] * 5, horizon=2)
    windows = preprocess_series(series, Pipeline.NOSTL, 3, stage=Stage.TEST)
    np.testing.assert_allclose(windows.last.input, np.log(np.array([4.0, 2.0, 4.0]) / 3.0))
    assert windows.last.record.series_mean == 3.0
    assert windows.last.record.log_offset == 0


def test_preprocess_rejects_missing():
    series = TimeSeries(id="a", values=[1.0, np.nan, 3.0, 4.0, 5.0])
    with pytest.raises(DomainError, match="'a'"):
        preprocess_series(series, Pipeline.STL, 1)


@pytest.mark.parametrize("pipeline", [Pipeline.STL, Pipeline.NOSTL])
def test_refit_targets_round_trip(pipeline):
    series = seasonal_series(length=72)
    windows = preprocess_series(series, pipeline, 8, stage=Stage.REFIT)
    for block in windows.blocks[::7]:
        stop = block.start + block.input.size
        restored = postprocess_forecast(block.target, block.record)
        np.testing.assert_allclose(restored, series.values[stop : stop + 6], rtol=1e-9)
        np.testing.assert_allclose(
            forward_future(series.values[stop : stop + 6], block.record), block.target, atol=1e-9
        )


@pytest.mark.parametrize("pipeline", [Pipeline.STL, Pipeline.NOSTL])
def test_future_round_trip_random_series(pipeline):
    rng = np.random.default_rng(5)
    for index in range(100):
        period = int(rng.choice([1, 4, 12]))
        horizon = int(rng.integers(1, 13))
        length = int(rng.integers(horizon + 4, 100))
        values = rng.uniform(1.0, 500.0) * np.exp(rng.normal(scale=0.3, size=length + horizon))
        series = TimeSeries(
            id=f"r{index}", values=values[:length], period=period, horizon=horizon
        )
        windows = preprocess_series(series, pipeline, 3, stage=Stage.TEST)
        future = values[length:]
        raw = forward_future(future, windows.last.record)
        np.testing.assert_allclose(
            postprocess_forecast(raw, windows.last.record), future, rtol=1e-6
        )


def test_postprocess():
    record = NormalizationRecord(
        pipeline=Pipeline.STL, log_offset=0, trend_anchor=2.0, seasonal_future=np.array([1.0])
    )
    np.testing.assert_allclose(postprocess_forecast([0.0], record), [20.085536923187668])
    counts = NormalizationRecord(pipeline=Pipeline.NOSTL, log_offset=1, series_mean=1.0)
    assert postprocess_forecast([math.log(0.6)], counts, integer_valued=True)[0] == 0.0
    np.testing.assert_array_equal(
        postprocess_forecast(np.log([2.4, 4.7]), counts, integer_valued=True), [1.0, 4.0]
    )


def test_postprocess_checks_length():
    record = NormalizationRecord(
        pipeline=Pipeline.STL, trend_anchor=0.0, seasonal_future=np.zeros(3)
    )
    with pytest.raises(ShapeError, match="3"):
        postprocess_forecast(np.zeros(2), record)


def test_record_contract():
    with pytest.raises(ContractError):
        NormalizationRecord(pipeline=Pipeline.NOSTL)
    with pytest.raises(ContractError):
        NormalizationRecord(pipeline=Pipeline.STL, trend_anchor=1.0)
