__all__ = [
    "RidgeModel",
    "seasonal_naive",
    "seasonal_naive_forecasts",
    "lag_matrix",
    "solve_ridge",
    "fit_ridge",
    "ridge_recursive_forecast",
    "ridge_forecasts",
    "tune_ridge_lambda",
]

import logging
import math

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import optuna

from globalrnn.constants import (
    DEFAULT_RIDGE_LAGS,
    MIN_RANDOM_TRIALS,
    RIDGE_CV_FOLDS,
    RIDGE_LAMBDA_UPPER_POOLED,
    RIDGE_LAMBDA_UPPER_UNPOOLED,
    RIDGE_SMBO_ITERATIONS,
    RIDGE_SPLIT_RATIO,
)
from globalrnn.evaluation import smape_modified
from globalrnn.exceptions import ContractError, NumericError, ScalingError, SizingError
from globalrnn.preprocess import mean_scale
from globalrnn.types import SeriesCollection
from globalrnn.utils import derive_seed


logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(eq=False)
class RidgeModel:
    """Linear autoregression on mean scaled values

    `coefficients[0]` is the intercept, `coefficients[j]` weighs lag j.
    """

    lags: int
    coefficients: np.ndarray
    lam: float
    pooled: bool

    def __post_init__(self) -> None:
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.lags < 1:
            raise ContractError(f"lags must be >= 1, got {self.lags}")
        if self.coefficients.shape != (self.lags + 1,):
            raise ContractError(
                f"{self.lags} lags need {self.lags + 1} coefficients, got {self.coefficients.shape}"
            )
        if not np.isfinite(self.coefficients).all():
            raise NumericError("ridge coefficients are not finite")


def seasonal_naive(values: ArrayLike, horizon: int, period: int = 1) -> np.ndarray:
    """Repeat the last observed season"""
    values = np.asarray(values, dtype=np.float64)
    if values.size < period:
        raise SizingError(f"seasonal naive needs {period} values, got {values.size}")
    steps = np.arange(horizon)
    return values[values.size - period + steps % period].copy()


def seasonal_naive_forecasts(collection: SeriesCollection) -> Dict[str, np.ndarray]:
    return {
        item.id: seasonal_naive(item.values, item.horizon, item.period) for item in collection
    }


def lag_matrix(values: ArrayLike, lags: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rows `[y(t-1), ..., y(t-lags)]` with target `y(t)` for every t >= lags"""
    values = np.asarray(values, dtype=np.float64)
    rows = values.size - lags
    if rows < 1:
        return np.zeros((0, lags)), np.zeros(0)
    X = np.column_stack([values[lags - j : values.size - j] for j in range(1, lags + 1)])
    return X, values[lags:].copy()


def solve_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Closed form ridge with an unpenalized intercept

    Raises:
    ------
        `NumericError`: The normal equations are singular.
    """
    if lam < 0:
        raise ContractError(f"lambda must be >= 0, got {lam}")
    design = np.column_stack([np.ones(X.shape[0]), X])
    shift = np.full(design.shape[1], float(lam))
    shift[0] = 0.0
    gram = design.T @ design + np.diag(shift)
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise NumericError(
            f"singular ridge system ({X.shape[0]} rows, {X.shape[1]} lags) at lambda={lam}, "
            "use lambda > 0"
        )
    return np.linalg.solve(gram, design.T @ y)


def _scaled(values: np.ndarray, series_id: str) -> Tuple[np.ndarray, float]:
    try:
        return mean_scale(values)
    except ScalingError as e:
        raise ScalingError(f"series '{series_id}': {e}") from e


def _rows(
    collection: SeriesCollection, lags: int, cut: Optional[float] = None
) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    rows = {}
    for item in collection:
        values = item.values if cut is None else item.values[: int(len(item) * cut)]
        scaled, _ = _scaled(values, item.id)
        rows[item.id] = lag_matrix(scaled, lags)
    return rows


def _fit_rows(
    rows: Dict[str, Tuple[np.ndarray, np.ndarray]], lags: int, lam: float, pooled: bool
) -> Dict[str, Optional[RidgeModel]]:
    if pooled:
        X = np.vstack([x for x, _ in rows.values()])
        y = np.concatenate([t for _, t in rows.values()])
        if y.size < 1:
            raise SizingError(f"no series is longer than {lags} lags")
        model = RidgeModel(lags=lags, coefficients=solve_ridge(X, y, lam), lam=lam, pooled=True)
        # series without a single lag row take the naive forecast, as unpooled
        return {sid: model if t.size else None for sid, (_, t) in rows.items()}
    models = {}
    for sid, (X, y) in rows.items():
        # fewer than lags + 2 values: fall back to the naive forecast
        if y.size < 2:
            models[sid] = None
            continue
        models[sid] = RidgeModel(lags=lags, coefficients=solve_ridge(X, y, lam), lam=lam, pooled=False)
    return models


def fit_ridge(
    collection: SeriesCollection,
    lags: int = DEFAULT_RIDGE_LAGS,
    lam: float = 0.0,
    pooled: bool = True,
) -> Dict[str, Optional[RidgeModel]]:
    """Ridge autoregression on mean scaled series

    Pooled stacks the lag rows of every series into one global model, which
    every id with at least one lag row maps to. Unpooled fits each series
    alone. Series too short to fit map to `None`.
    """
    if lags < 1:
        raise ContractError(f"lags must be >= 1, got {lags}")
    models = _fit_rows(_rows(collection, lags), lags, lam, pooled)
    fallbacks = [sid for sid, model in models.items() if model is None]
    if fallbacks:
        logger.info("%d series too short for %d lags use the naive forecast", len(fallbacks), lags)
    return models


def ridge_recursive_forecast(model: RidgeModel, values: ArrayLike, horizon: int) -> np.ndarray:
    """Forecast one step at a time, feeding each prediction back as lag 1"""
    values = np.asarray(values, dtype=np.float64)
    if values.size < model.lags:
        raise SizingError(f"{model.lags} lags need as many values, got {values.size}")
    if horizon < 1:
        return np.zeros(0)
    scaled, mean = mean_scale(values)
    history = list(scaled[::-1][: model.lags])
    intercept, weights = model.coefficients[0], model.coefficients[1:]
    forecast = []
    for _ in range(horizon):
        step = float(intercept + weights @ np.asarray(history))
        forecast.append(step)
        history = [step] + history[:-1]
    return np.asarray(forecast) * mean


def ridge_forecasts(
    models: Dict[str, Optional[RidgeModel]], collection: SeriesCollection
) -> Dict[str, np.ndarray]:
    forecasts = {}
    for item in collection:
        model = models.get(item.id)
        if model is None:
            forecasts[item.id] = seasonal_naive(item.values, item.horizon, 1)
        else:
            forecasts[item.id] = ridge_recursive_forecast(model, item.values, item.horizon)
    return forecasts


def _fold_error(X: np.ndarray, y: np.ndarray, lam: float, folds: List[np.ndarray]) -> float:
    errors = []
    for fold in folds:
        train = np.ones(y.size, dtype=bool)
        train[fold] = False
        coefficients = solve_ridge(X[train], y[train], lam)
        predicted = coefficients[0] + X[fold] @ coefficients[1:]
        errors.append(np.mean((predicted - y[fold]) ** 2))
    return float(np.mean(errors))


def _grid_cv(
    rows: Dict[str, Tuple[np.ndarray, np.ndarray]], pooled: bool, upper: float, seed: int
) -> float:
    if pooled:
        groups = [
            (np.vstack([x for x, _ in rows.values()]), np.concatenate([t for _, t in rows.values()]))
        ]
    else:
        groups = list(rows.values())
    groups = [(x, t) for x, t in groups if t.size >= 2]
    if not groups:
        raise SizingError("not enough lag rows for cross validation")
    rng = np.random.default_rng(derive_seed(seed, "ridge-cv"))
    splits = [
        np.array_split(rng.permutation(t.size), min(RIDGE_CV_FOLDS, t.size)) for _, t in groups
    ]
    grid = np.concatenate([[0.0], np.geomspace(upper * 1e-5, upper, 40)])
    best_lam, best_error = None, math.inf
    for lam in grid:
        try:
            error = float(np.mean([_fold_error(x, t, lam, f) for (x, t), f in zip(groups, splits)]))
        except NumericError:
            continue
        if error < best_error:
            best_lam, best_error = float(lam), error
    if best_lam is None:
        raise NumericError("every lambda of the grid gave a singular system")
    logger.debug("grid-cv: lambda %.6g, mse %.6g", best_lam, best_error)
    return best_lam


def _smbo(
    collection: SeriesCollection,
    lags: int,
    pooled: bool,
    upper: float,
    seed: int,
    iterations: int,
) -> float:
    cut = RIDGE_SPLIT_RATIO
    usable = [item for item in collection if int(len(item) * cut) > lags and len(item) - int(len(item) * cut) >= 1]
    if not usable:
        raise SizingError(f"no series leaves {lags} lags before a {cut:.0%} split")
    subset = collection.subset(usable)
    rows = _rows(subset, lags, cut)
    holdout = {item.id: item.values[int(len(item) * cut) :] for item in usable}
    history = {item.id: item.values[: int(len(item) * cut)] for item in usable}

    def objective(trial: optuna.trial.Trial) -> float:
        lam = trial.suggest_float("lambda", 0.0, upper)
        models = _fit_rows(rows, lags, lam, pooled)
        errors = []
        for sid, actual in holdout.items():
            model = models[sid]
            if model is None:
                forecast = seasonal_naive(history[sid], actual.size, 1)
            else:
                forecast = ridge_recursive_forecast(model, history[sid], actual.size)
            errors.append(smape_modified(forecast, actual))
        return float(np.mean(errors))

    optuna.logging.set_verbosity(optuna.logging.WARNING)
    study = optuna.create_study(
        direction="minimize",
        sampler=optuna.samplers.TPESampler(
            seed=derive_seed(seed, "ridge-smbo"),
            n_startup_trials=max(MIN_RANDOM_TRIALS, iterations // 5),
        ),
    )
    study.optimize(objective, n_trials=iterations, catch=(NumericError,))
    completed = [t for t in study.trials if t.state == optuna.trial.TrialState.COMPLETE]
    if not completed:
        raise NumericError("every lambda tried gave a singular system")
    logger.debug("smbo: lambda %.6g, smape %.4f", study.best_params["lambda"], study.best_value)
    return float(study.best_params["lambda"])


def tune_ridge_lambda(
    collection: SeriesCollection,
    lags: int = DEFAULT_RIDGE_LAGS,
    pooled: bool = True,
    method: str = "grid-cv",
    seed: int = 0,
    iterations: int = RIDGE_SMBO_ITERATIONS,
) -> float:
    """L2 strength for `fit_ridge`

    `grid-cv` scores a grid (0 included) by 10 fold cross validated MSE over
    random lag row folds; `smbo` runs a TPE search scored by the modified
    SMAPE of a 70 / 30 split of every series. The search range is [0, 1]
    pooled and [0, 200] unpooled.
    """
    upper = RIDGE_LAMBDA_UPPER_POOLED if pooled else RIDGE_LAMBDA_UPPER_UNPOOLED
    if method == "grid-cv":
        lam = _grid_cv(_rows(collection, lags), pooled, upper, seed)
    elif method == "smbo":
        lam = _smbo(collection, lags, pooled, upper, seed, iterations)
    else:
        raise ContractError(f"unknown lambda search '{method}', use grid-cv or smbo")
    logger.info(
        "%s ridge, %d lags: lambda %.6g (%s)", "pooled" if pooled else "unpooled", lags, lam, method
    )
    return lam
