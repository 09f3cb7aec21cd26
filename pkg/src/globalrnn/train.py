__all__ = [
    "TrainedModel",
    "ValidationData",
    "EnsembleForecast",
    "input_window_size",
    "prepare_windows",
    "prepare_validation",
    "build_network",
    "train_model",
    "predict",
    "forecast_series",
    "validation_error",
    "validate",
    "tune",
    "median_ensemble",
    "forecast_with_seed",
    "ensemble_forecast",
    "save_checkpoint",
    "load_checkpoint",
]

import logging
import math
import time

from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import optuna

from globalrnn.arch import Network, forward, make_batch, minibatch_loss
from globalrnn.cells import dim_from_param_budget
from globalrnn.constants import CHECKPOINT_MAGIC, DEFAULT_TUNING_ITERATIONS, MIN_RANDOM_TRIALS
from globalrnn.data import split_train_validation
from globalrnn.evaluation import smape_modified
from globalrnn.exceptions import (
    ContractError,
    NumericError,
    NumericFailure,
    TrainingError,
    TuningError,
)
from globalrnn.gradcore import Tape, backward
from globalrnn.optim import Optimizer, make_optimizer
from globalrnn.preprocess import (
    collection_input_window_size,
    postprocess_forecast,
    preprocess_collection,
)
from globalrnn.serialization import read_container, write_container
from globalrnn.types import (
    ArchitectureKind,
    HyperparameterSpace,
    ModelConfig,
    OptimizerKind,
    SeriesCollection,
    Stage,
    TrialRecord,
    TuneResult,
    WindowSet,
)
from globalrnn.utils import derive_seed, round_half_away, run_jobs, sublists, time_formater
from globalrnn.window_cache import WindowCache


logger = logging.getLogger(__name__)

Objective = Callable[[ModelConfig], float]


@dataclass(eq=False)
class TrainedModel:
    config: ModelConfig
    network: Network
    optimizer: Optimizer
    seed: int
    loss_history: List[float] = field(default_factory=list)


@dataclass(eq=False)
class ValidationData:
    """Windows and held back targets shared by every tuning trial"""

    train: List[WindowSet]
    validation: List[WindowSet]
    targets: Dict[str, np.ndarray]


@dataclass(eq=False)
class EnsembleForecast:
    seeds: List[int]
    per_seed: List[Dict[str, np.ndarray]]
    ensemble: Dict[str, np.ndarray]


def _require_homogeneous(collection: SeriesCollection) -> None:
    if not collection.is_homogeneous:
        horizons = sorted({item.horizon for item in collection})
        raise ContractError(
            f"'{collection.name}' mixes horizons {horizons}, split it with horizon_groups() first"
        )


def input_window_size(config: ModelConfig, collection: SeriesCollection) -> int:
    """`m` for moving window architectures, 1 for scalar sequences"""
    if not config.architecture.moving_window:
        return 1
    return collection_input_window_size(collection, config.input_window_variant)


def prepare_windows(
    config: ModelConfig,
    collection: SeriesCollection,
    stage: Union[str, Stage],
    m: Optional[int] = None,
    cache: Optional[WindowCache] = None,
    context: bool = False,
) -> List[WindowSet]:
    _require_homogeneous(collection)
    m = input_window_size(config, collection) if m is None else m
    moving_window = config.architecture.moving_window
    if cache is not None:
        return cache.get_or_build(collection, config.pipeline, m, stage, moving_window, context)
    return preprocess_collection(collection, config.pipeline, m, stage, moving_window, context)


def prepare_validation(
    config: ModelConfig,
    collection: SeriesCollection,
    cache: Optional[WindowCache] = None,
    m: Optional[int] = None,
) -> ValidationData:
    m = input_window_size(config, collection) if m is None else m
    return ValidationData(
        train=prepare_windows(config, collection, Stage.TRAIN, m, cache),
        validation=prepare_windows(config, collection, Stage.VALIDATION, m, cache),
        targets={item.id: split_train_validation(item).validation_target for item in collection},
    )


def build_network(config: ModelConfig, m: int, horizon: int, seed: int) -> Network:
    """Freshly initialized network; the cell dimension may come from a parameter budget"""
    hp = config.hyperparameters
    d = hp.cell_dim
    if d is None:
        if config.architecture is ArchitectureKind.S2S_DECODER_NMW:
            # encoder and decoder are the same size, m = 1 for both
            d = dim_from_param_budget(config.cell, 1, hp.layers, hp.param_budget // 2)
        else:
            d = dim_from_param_budget(config.cell, m, hp.layers, hp.param_budget)
        logger.debug("Budget %d gives cell dimension %d", hp.param_budget, d)
    rng = np.random.default_rng(derive_seed(seed, "init"))
    return Network.initialize(
        config.architecture, config.cell, m, d, hp.layers, horizon, hp.init_sigma, rng
    )


def _horizon_of(windows: Sequence[WindowSet]) -> int:
    horizons = {ws.n for ws in windows}
    if len(horizons) != 1:
        raise ContractError(f"windows mix output sizes {sorted(horizons)}")
    return horizons.pop()


def train_model(config: ModelConfig, windows: Sequence[WindowSet], seed: int) -> TrainedModel:
    """Train one global model over the window sets of every series

    Each epoch traverses the (seeded shuffle of the) series `epoch_size`
    times; every minibatch of `minibatch_size` series makes one optimizer step
    on its mean regularized loss.

    Raises:
    ------
        `TrainingError`: Non-finite loss, gradient or parameter, with epoch and step.
    """
    if not windows:
        raise ContractError("no windows to train on")
    horizon = _horizon_of(windows)
    hp = config.hyperparameters
    network = build_network(config, windows[0].m, horizon, seed)
    params = network.parameters()
    optimizer = make_optimizer(config.optimizer, params, hp)
    model = TrainedModel(config=config, network=network, optimizer=optimizer, seed=seed)

    trainable = [ws for ws in windows if ws.trainable_blocks]
    if not trainable:
        raise ContractError("none of the window sets carries a target")
    order_rng = np.random.default_rng(derive_seed(seed, "order"))
    noise_rng = np.random.default_rng(derive_seed(seed, "noise"))
    started = time.perf_counter()
    step = 0
    for epoch in range(1, hp.epochs + 1):
        losses = []
        for _ in range(hp.epoch_size):
            order = order_rng.permutation(len(trainable)).tolist()
            for chunk in sublists(order, hp.minibatch_size):
                step += 1
                batch = make_batch([trainable[i] for i in chunk])
                tape = Tape()
                try:
                    result = forward(tape, network, batch, hp.noise_sigma, noise_rng, training=True)
                    loss = minibatch_loss(tape, result, network, hp.l2_psi, len(batch))
                    optimizer.step(backward(tape, loss, params))
                except NumericError as e:
                    raise TrainingError(f"epoch {epoch}, step {step}: {e}") from e
                losses.append(float(loss.data[0]))
        model.loss_history.append(float(np.mean(losses)))
        logger.debug("seed %d epoch %d/%d: loss %.6f", seed, epoch, hp.epochs, model.loss_history[-1])
    logger.info(
        "Trained %s/%s (seed %d, %d parameters, %d steps) in %s",
        config.architecture.value,
        config.cell.value,
        seed,
        network.param_count,
        step,
        time_formater(time.perf_counter() - started),
    )
    return model


def predict(model: TrainedModel, windows: Sequence[WindowSet], chunk: int = 256) -> np.ndarray:
    """Raw network forecasts, one row per window set, nothing recorded"""
    tape = Tape(enabled=False)
    rows = [
        forward(tape, model.network, make_batch(part), training=False).forecast
        for part in sublists(list(windows), chunk)
    ]
    return np.vstack(rows)


def forecast_series(model: TrainedModel, windows: Sequence[WindowSet]) -> Dict[str, np.ndarray]:
    """Forecasts on the original scale keyed by series id"""
    raw = predict(model, windows)
    return {
        ws.series_id: postprocess_forecast(row, ws.last.record, ws.integer_valued)
        for ws, row in zip(windows, raw)
    }


def validation_error(
    forecasts: Mapping[str, np.ndarray], targets: Mapping[str, np.ndarray]
) -> float:
    """Mean modified SMAPE over the series"""
    missing = set(targets) - set(forecasts)
    if missing:
        raise ContractError(f"no forecast for series {sorted(missing)}")
    return float(np.mean([smape_modified(forecasts[sid], target) for sid, target in targets.items()]))


def validate(
    config: ModelConfig,
    collection: SeriesCollection,
    seed: int,
    data: Optional[ValidationData] = None,
    cache: Optional[WindowCache] = None,
) -> float:
    """Train on the training part, forecast the reserved horizon, return its mean SMAPE"""
    data = data or prepare_validation(config, collection, cache)
    model = train_model(config, data.train, seed)
    return validation_error(forecast_series(model, data.validation), data.targets)


def _suggest(trial: optuna.trial.BaseTrial, space: HyperparameterSpace) -> Dict[str, Union[int, float]]:
    params = {}
    for name, bounds in space.items().items():
        if bounds.integer:
            params[name] = trial.suggest_int(name, int(bounds.low), int(bounds.high), log=bounds.log)
        else:
            params[name] = trial.suggest_float(name, bounds.low, bounds.high, log=bounds.log)
    return params


def _apply(fixed: ModelConfig, params: Mapping[str, Union[int, float]]) -> ModelConfig:
    changes = dict(params)
    if "param_budget" in changes:
        changes["cell_dim"] = None
    elif "cell_dim" in changes:
        changes["param_budget"] = None
    if fixed.optimizer is OptimizerKind.COCOB:
        changes["learning_rate"] = None
    return fixed.with_hyperparameters(**changes)


def tune(
    space: HyperparameterSpace,
    fixed: ModelConfig,
    collection: SeriesCollection,
    iterations: int = DEFAULT_TUNING_ITERATIONS,
    seed: int = 0,
    objective: Optional[Objective] = None,
    cache: Optional[WindowCache] = None,
    timings: bool = True,
) -> TuneResult:
    """Sequential model based search over `space`

    The first max(10, iterations / 5) trials are drawn at random, the rest by
    a tree structured Parzen estimator fitted to the finished trials. Every
    trial trains on one fixed seed and is scored by `validate` unless an
    `objective` is given.

    Raises:
    ------
        `TuningError`: Every trial failed numerically.
    """
    if iterations < 1:
        raise ContractError(f"iterations must be >= 1, got {iterations}")
    space = space.for_optimizer(fixed.optimizer)
    if objective is None:
        data = prepare_validation(fixed, collection, cache)
        objective = partial(
            validate, collection=collection, seed=derive_seed(seed, "trial"), data=data
        )
    optuna.logging.set_verbosity(optuna.logging.WARNING)
    sampler = optuna.samplers.TPESampler(
        seed=derive_seed(seed, "sampler"),
        n_startup_trials=max(MIN_RANDOM_TRIALS, iterations // 5),
    )
    study = optuna.create_study(direction="minimize", sampler=sampler)

    trials: List[TrialRecord] = []
    best_error, best_config = math.inf, None
    for index in range(1, iterations + 1):
        trial = study.ask()
        params = _suggest(trial, space)
        config = _apply(fixed, params)
        started = time.perf_counter()
        try:
            error = float(objective(config))
            if not math.isfinite(error):
                raise NumericError(f"objective returned {error}")
        except NumericFailure as e:
            logger.warning("Trial %d/%d failed: %s", index, iterations, e)
            study.tell(trial, state=optuna.trial.TrialState.FAIL)
            error = math.nan
        else:
            study.tell(trial, error)
        seconds = time.perf_counter() - started
        trials.append(TrialRecord(index=index, params=params, validation_smape=error, seconds=seconds if timings else 0.0))
        if error < best_error:
            best_error, best_config = error, config
        logger.info(
            "Trial %d/%d: smape %.4f (best %.4f) in %s",
            index,
            iterations,
            error,
            best_error,
            time_formater(seconds),
        )
    if best_config is None:
        log = "; ".join(f"#{t.index} {t.params}" for t in trials)
        raise TuningError(f"all {iterations} trials failed: {log}")
    return TuneResult(best_config=best_config, trials=trials, iterations=iterations)


def median_ensemble(
    forecasts: Sequence[Mapping[str, np.ndarray]], integer_valued: bool = False
) -> Dict[str, np.ndarray]:
    """Elementwise median across seeds, per series and step"""
    if not forecasts:
        raise ContractError("median of zero forecasts")
    ids = list(forecasts[0])
    for other in forecasts[1:]:
        if set(other) != set(ids):
            raise ContractError(f"seed forecasts cover different series: {sorted(set(other) ^ set(ids))}")
    ensemble = {}
    for sid in ids:
        value = np.median(np.stack([f[sid] for f in forecasts]), axis=0)
        ensemble[sid] = round_half_away(value) if integer_valued else value
    return ensemble


def forecast_with_seed(
    seed: int,
    config: ModelConfig,
    refit_windows: Sequence[WindowSet],
    test_windows: Sequence[WindowSet],
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> Dict[str, np.ndarray]:
    """Retrain on the whole series with one seed and forecast past its end"""
    model = train_model(config, refit_windows, seed)
    if checkpoint_dir is not None:
        save_checkpoint(Path(checkpoint_dir) / f"seed_{seed}.ckpt", model)
    return forecast_series(model, test_windows)


async def ensemble_forecast(
    config: ModelConfig,
    collection: SeriesCollection,
    seeds: Sequence[int],
    jobs: int = 1,
    cache: Optional[WindowCache] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> EnsembleForecast:
    """Median of per-seed forecasts, each from a model retrained on the full series

    Windows are built once and shared; seeds run on up to `jobs` processes
    and are reduced in the given seed order.
    """
    if not seeds:
        raise ContractError("ensemble needs at least one seed")
    m = input_window_size(config, collection)
    refit = prepare_windows(config, collection, Stage.REFIT, m, cache)
    test = prepare_windows(
        config, collection, Stage.TEST, m, cache, context=config.architecture.moving_window
    )
    per_seed = await run_jobs(
        forecast_with_seed,
        list(seeds),
        jobs,
        config=config,
        refit_windows=refit,
        test_windows=test,
        checkpoint_dir=checkpoint_dir,
    )
    return EnsembleForecast(
        seeds=list(seeds),
        per_seed=per_seed,
        ensemble=median_ensemble(per_seed, collection.integer_valued),
    )


def save_checkpoint(path: Union[str, Path], model: TrainedModel) -> Path:
    network = model.network
    meta = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "m": network.m,
        "d": network.d,
        "horizon": network.horizon,
        "loss_history": model.loss_history,
    }
    arrays = {f"net/{name}": value for name, value in network.state_dict().items()}
    arrays.update({f"opt/{name}": value for name, value in model.optimizer.state_dict().items()})
    return write_container(path, CHECKPOINT_MAGIC, meta, arrays)


def load_checkpoint(path: Union[str, Path]) -> TrainedModel:
    """Network and optimizer state as saved; training can resume from it

    Raises:
    ------
        `CacheError`: Not a checkpoint or written by another format version.
    """
    meta, arrays = read_container(path, CHECKPOINT_MAGIC)
    config = ModelConfig.from_dict(meta["config"])
    network = Network.initialize(
        config.architecture,
        config.cell,
        meta["m"],
        meta["d"],
        config.hyperparameters.layers,
        meta["horizon"],
    )
    network.load_state_dict(
        {name[4:]: value for name, value in arrays.items() if name.startswith("net/")}
    )
    optimizer = make_optimizer(config.optimizer, network.parameters(), config.hyperparameters)
    optimizer.load_state_dict(
        {name[4:]: value for name, value in arrays.items() if name.startswith("opt/")}
    )
    return TrainedModel(
        config=config,
        network=network,
        optimizer=optimizer,
        seed=int(meta["seed"]),
        loss_history=list(meta["loss_history"]),
    )
