import numpy as np
import pytest

from globalrnn.baselines import (
    RidgeModel,
    fit_ridge,
    lag_matrix,
    ridge_forecasts,
    ridge_recursive_forecast,
    seasonal_naive,
    seasonal_naive_forecasts,
    solve_ridge,
    tune_ridge_lambda,
)
from globalrnn.exceptions import ContractError, NumericError, SizingError
from globalrnn.types import SeriesCollection, TimeSeries


def collection_of(*series, horizon=3, period=1):
    return SeriesCollection(
        name="test",
        series=[
            TimeSeries(id=f"s{i}", values=values, horizon=horizon, period=period)
            for i, values in enumerate(series)
        ],
        horizon=horizon,
        period=period,
    )


def sinusoids(count=3, length=70):
    t = np.arange(length)
    return [10.0 + 3.0 * np.sin(2.0 * np.pi * t / 7 + phase) for phase in np.linspace(0, 2, count)]


def test_seasonal_naive():
    values = [1, 2, 3, 4, 5, 6]
    np.testing.assert_array_equal(seasonal_naive(values, 3, 3), [4, 5, 6])
    np.testing.assert_array_equal(seasonal_naive(values, 6, 3), [4, 5, 6, 4, 5, 6])
    np.testing.assert_array_equal(seasonal_naive(values, 2, 1), [6, 6])
    with pytest.raises(SizingError):
        seasonal_naive([1, 2], 2, 3)


def test_seasonal_naive_forecasts_use_own_horizon():
    collection = collection_of(np.arange(1.0, 13.0), horizon=4, period=4)
    np.testing.assert_array_equal(seasonal_naive_forecasts(collection)["s0"], [9, 10, 11, 12])


def test_lag_matrix():
    X, y = lag_matrix([1.0, 2.0, 3.0, 4.0, 5.0], 2)
    np.testing.assert_array_equal(X, [[2, 1], [3, 2], [4, 3]])
    np.testing.assert_array_equal(y, [3, 4, 5])
    X, y = lag_matrix([1.0, 2.0], 2)
    assert X.shape == (0, 2) and y.size == 0


def test_ridge_exact_ar1():
    values = 64.0 * 0.5 ** np.arange(10)
    X, y = lag_matrix(values, 1)
    coefficients = solve_ridge(X, y, 0.0)
    np.testing.assert_allclose(coefficients, [0.0, 0.5], atol=1e-9)
    model = fit_ridge(collection_of(values), lags=1, lam=0.0, pooled=False)["s0"]
    np.testing.assert_allclose(model.coefficients, [0.0, 0.5], atol=1e-9)


def test_ridge_large_lambda_limit():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(50, 3)), rng.normal(size=50) + 4.0
    coefficients = solve_ridge(X, y, 1e12)
    np.testing.assert_allclose(coefficients[1:], 0.0, atol=1e-9)
    np.testing.assert_allclose(coefficients[0], y.mean(), rtol=1e-6)


@pytest.mark.parametrize("lam", [0.0, 0.7, 25.0])
def test_ridge_matches_gradient_descent(lam):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 3))
    y = X @ np.array([0.5, -1.0, 2.0]) + 3.0 + rng.normal(scale=0.5, size=50)
    design = np.column_stack([np.ones(50), X])
    penalty = np.diag([0.0, lam, lam, lam])
    hessian = 2.0 * (design.T @ design + penalty)
    step = 1.0 / np.linalg.eigvalsh(hessian).max()
    beta = np.zeros(4)
    for _ in range(20000):
        beta -= step * (2.0 * design.T @ (design @ beta - y) + 2.0 * penalty @ beta)
    np.testing.assert_allclose(solve_ridge(X, y, lam), beta, rtol=0.0, atol=1e-6)


def test_ridge_singular_system():
    X, y = lag_matrix(np.full(20, 5.0), 2)
    with pytest.raises(NumericError, match="lambda > 0"):
        solve_ridge(X, y, 0.0)
    assert np.isfinite(solve_ridge(X, y, 0.1)).all()
    with pytest.raises(ContractError):
        solve_ridge(X, y, -1.0)


def test_recursive_forecast():
    half = RidgeModel(lags=1, coefficients=[0.0, 0.5], lam=0.0, pooled=True)
    np.testing.assert_allclose(ridge_recursive_forecast(half, [16.0, 8.0], 3), [4.0, 2.0, 1.0])
    identity = RidgeModel(lags=1, coefficients=[0.0, 1.0], lam=0.0, pooled=True)
    np.testing.assert_allclose(ridge_recursive_forecast(identity, [3.0, 7.0], 4), [7.0] * 4)
    assert ridge_recursive_forecast(identity, [3.0, 7.0], 0).size == 0


def test_ridge_model_contract():
    with pytest.raises(ContractError):
        RidgeModel(lags=2, coefficients=[0.0, 1.0], lam=0.0, pooled=True)


def test_pooled_matches_unpooled_on_identical_series():
    values = sinusoids(1)[0]
    pooled = fit_ridge(collection_of(values, values.copy(), values.copy()), lags=2, lam=0.0)
    single = fit_ridge(collection_of(values), lags=2, lam=0.0, pooled=False)
    assert pooled["s0"] is pooled["s2"]
    np.testing.assert_allclose(pooled["s0"].coefficients, single["s0"].coefficients, atol=1e-8)


@pytest.mark.parametrize("pooled, lags", [(False, 2), (True, 3), (True, 10)])
def test_short_series_fall_back_to_naive(pooled, lags):
    collection = collection_of(sinusoids(1)[0], np.array([4.0, 5.0, 6.0]))
    models = fit_ridge(collection, lags=lags, lam=0.1, pooled=pooled)
    assert models["s1"] is None
    assert models["s0"] is not None
    forecasts = ridge_forecasts(models, collection)
    np.testing.assert_array_equal(forecasts["s1"], [6.0, 6.0, 6.0])
    assert forecasts["s0"].shape == (3,)
    assert np.isfinite(forecasts["s0"]).all()


def test_ridge_forecasts_follow_sinusoid():
    series = sinusoids(2, length=77)
    train = collection_of(*[s[:70] for s in series], horizon=7)
    models = fit_ridge(train, lags=2, lam=0.0)
    forecasts = ridge_forecasts(models, train)
    for i, s in enumerate(series):
        np.testing.assert_allclose(forecasts[f"s{i}"], s[70:], rtol=1e-6)


def test_grid_cv_prefers_small_lambda_on_exact_data():
    lam = tune_ridge_lambda(collection_of(*sinusoids()), lags=2, pooled=True, method="grid-cv")
    assert 0.0 <= lam <= 1e-4


@pytest.mark.parametrize("pooled, upper", [(True, 1.0), (False, 200.0)])
@pytest.mark.parametrize("method", ["grid-cv", "smbo"])
def test_lambda_search_range(pooled, upper, method):
    rng = np.random.default_rng(1)
    noisy = [s * np.exp(0.05 * rng.normal(size=s.size)) for s in sinusoids()]
    lam = tune_ridge_lambda(
        collection_of(*noisy), lags=3, pooled=pooled, method=method, seed=2, iterations=12
    )
    assert 0.0 <= lam <= upper


def test_lambda_search_is_seeded():
    collection = collection_of(*sinusoids())
    first = tune_ridge_lambda(collection, lags=2, method="smbo", seed=5, iterations=10)
    assert first == tune_ridge_lambda(collection, lags=2, method="smbo", seed=5, iterations=10)
    with pytest.raises(ContractError):
        tune_ridge_lambda(collection, method="bayes")
