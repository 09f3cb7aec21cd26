__all__ = ["Study"]

import json
import logging
import time

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from globalrnn.baselines import (
    fit_ridge,
    ridge_forecasts,
    seasonal_naive_forecasts,
    tune_ridge_lambda,
)
from globalrnn.constants import DEFAULT_RIDGE_LAGS, DEFAULT_TUNING_ITERATIONS
from globalrnn.data import (
    DatasetManifest,
    load_manifest,
    read_forecasts,
    write_forecasts,
)
from globalrnn.evaluation import evaluate_model, metrics_table, summary_table, write_tsv
from globalrnn.exceptions import ContractError
from globalrnn.preprocess import series_seasonality_strength
from globalrnn.train import (
    EnsembleForecast,
    ensemble_forecast,
    input_window_size,
    prepare_windows,
    tune,
)
from globalrnn.trial_store import TrialStore
from globalrnn.types import (
    EvaluationReport,
    HyperparameterSpace,
    ModelConfig,
    SeriesCollection,
    Stage,
    TuneResult,
)
from globalrnn.utils import run_sync, time_formater
from globalrnn.window_cache import WindowCache


logger = logging.getLogger(__name__)

BASELINE_KINDS = ("snaive", "ridge-pooled", "ridge-unpooled")


class Study:
    def __init__(
        self,
        out_dir: Union[str, Path] = "output",
        seed: int = 0,
        jobs: int = 1,
        cache_path: Union[str, Path, None] = None,
        clean_cache: bool = False,
        timings: bool = True,
    ) -> None:
        """Runs every pipeline step and writes its artifacts under `out_dir`

        Parameters:
        ----------
            - out_dir (`Union[str, Path]`, optional): Output directory. (Defaults to `"output"`)
            - seed (`int`, optional): Root seed every random stream derives from. (Defaults to `0`)
            - jobs (`int`, optional): Worker processes for seeds. (Defaults to `1`)
            - cache_path (`Union[str, Path, None]`, optional): Window cache, `FORECAST_CACHE_DIR` wins. (Defaults to `<out_dir>/cache`)
            - clean_cache (`bool`, optional): Drop cached windows first. (Defaults to `False`)
            - timings (`bool`, optional): Record wall clock seconds in trial logs. (Defaults to `True`)
        """
        self.out = Path(out_dir)
        if self.out.is_file():
            raise ContractError(f"'{out_dir}' expected a Directory got a File instead")
        self.out.mkdir(exist_ok=True, parents=True)
        self.seed = seed
        self.jobs = max(1, jobs)
        self.timings = timings
        self.cache = WindowCache(cache_path or self.out / "cache", clean=clean_cache)
        self.store = TrialStore(self.out / "trials.db")

    @classmethod
    async def init(cls, *args, **kwargs) -> "Study":
        """Create and start a study, no need to call start()"""
        study = cls(*args, **kwargs)
        await study.start()
        return study

    async def start(self) -> None:
        await self.store._init()

    async def stop(self) -> None:
        await self.store.close()

    async def __aenter__(self) -> "Study":
        await self.start()
        return self

    async def __aexit__(self, *_) -> None:
        await self.stop()

    @staticmethod
    def load(manifest_path: Union[str, Path]) -> Tuple[DatasetManifest, SeriesCollection]:
        manifest = load_manifest(manifest_path)
        collection = manifest.load()
        logger.info(
            "Loaded '%s': %d series, horizon %d, period %d",
            collection.name,
            len(collection),
            collection.horizon,
            collection.period,
        )
        return manifest, collection

    @staticmethod
    def groups(collection: SeriesCollection) -> Dict[str, SeriesCollection]:
        """Homogeneous horizon groups keyed by output suffix (`""` for a single group)"""
        groups = collection.horizon_groups()
        if len(groups) == 1:
            return {"": next(iter(groups.values()))}
        return {f"_h{horizon}": group for horizon, group in groups.items()}

    def _study_key(self, group: SeriesCollection, config: ModelConfig) -> str:
        return "/".join(
            (
                group.name,
                config.architecture.value,
                config.cell.value,
                config.optimizer.value,
                config.pipeline.value,
                f"seed{self.seed}",
            )
        )

    async def preprocess(
        self, collection: SeriesCollection, config: ModelConfig
    ) -> List[Tuple[str, str, int]]:
        """Fill the window cache for every stage; writes `seasonality<suffix>.tsv`

        Returns:
        -------
            `List[Tuple[str, str, int]]`: (series id, stage, block count) rows.
        """

        @run_sync
        def build(group: SeriesCollection) -> Tuple[List[Tuple[str, str, int]], pd.DataFrame]:
            m = input_window_size(config, group)
            moving = config.architecture.moving_window
            counts = []
            for stage in Stage:
                context = stage is Stage.TEST and moving
                for window_set in prepare_windows(config, group, stage, m, self.cache, context):
                    counts.append((window_set.series_id, stage.value, len(window_set)))
            logger.info("'%s': m=%d, windows cached under %s", group.name, m, self.cache.path)
            strength = pd.DataFrame(
                [
                    {
                        "series": item.id,
                        "period": item.period,
                        "strength": series_seasonality_strength(item),
                    }
                    for item in group
                ],
                columns=["series", "period", "strength"],
            )
            return counts, strength

        rows = []
        for suffix, group in self.groups(collection).items():
            counts, strength = await build(group)
            rows.extend(counts)
            write_tsv(strength, self.out / f"seasonality{suffix}.tsv")
            logger.info(
                "'%s': median seasonality strength %.3f", group.name, strength["strength"].median()
            )
        return rows

    def _write_trials(self, path: Path, result: TuneResult, space: HyperparameterSpace) -> Path:
        names = list(space.for_optimizer(result.best_config.optimizer).items())
        frame = pd.DataFrame(
            [
                {
                    "trial": t.index,
                    **{name: t.params.get(name) for name in names},
                    "validation_smape": t.validation_smape,
                    "seconds": t.seconds,
                }
                for t in result.trials
            ],
            columns=["trial", *names, "validation_smape", "seconds"],
        )
        frame.to_csv(path, index=False, float_format="%.10g", na_rep="NA")
        return path

    async def tune(
        self,
        collection: SeriesCollection,
        fixed: ModelConfig,
        space: Optional[HyperparameterSpace] = None,
        iterations: int = DEFAULT_TUNING_ITERATIONS,
    ) -> Dict[str, TuneResult]:
        """Tune each horizon group; writes `trials<suffix>.csv` and `best_config<suffix>.json`"""
        results = {}
        for suffix, group in self.groups(collection).items():
            group_space = space or HyperparameterSpace.default(len(group), fixed.optimizer)
            key = self._study_key(group, fixed)
            previous = await self.store.best_trial(key)
            if previous is not None:
                logger.info(
                    "'%s': stored run has %d trials, best validation smape %.4f at trial %d",
                    group.name,
                    len(await self.store.get_trials(key)),
                    previous.validation_smape,
                    previous.index,
                )
            started = time.perf_counter()
            result = await run_sync(tune)(
                group_space,
                fixed,
                group,
                iterations=iterations,
                seed=self.seed,
                cache=self.cache,
                timings=self.timings,
            )
            self._write_trials(self.out / f"trials{suffix}.csv", result, group_space)
            result.best_config.save(self.out / f"best_config{suffix}.json")
            await self.store.save_trials(key, result.trials)
            logger.info(
                "'%s': best validation smape %.4f after %d trials in %s",
                group.name,
                result.best_error,
                iterations,
                time_formater(time.perf_counter() - started),
            )
            results[suffix] = result
        return results

    async def forecast(
        self,
        collection: SeriesCollection,
        config: Union[ModelConfig, Dict[str, ModelConfig]],
        seeds: Sequence[int],
        checkpoints: bool = False,
    ) -> Dict[str, EnsembleForecast]:
        """Median ensemble per horizon group

        Writes `forecast<suffix>.csv` and one `forecast<suffix>_seed<seed>.csv`
        per seed. `config` may map group suffixes to their own config.
        """
        results = {}
        for suffix, group in self.groups(collection).items():
            group_config = config[suffix] if isinstance(config, dict) else config
            checkpoint_dir = self.out / f"checkpoints{suffix}" if checkpoints else None
            started = time.perf_counter()
            result = await ensemble_forecast(
                group_config,
                group,
                seeds,
                jobs=self.jobs,
                cache=self.cache,
                checkpoint_dir=checkpoint_dir,
            )
            write_forecasts(self.out / f"forecast{suffix}.csv", result.ensemble)
            for seed, forecasts in zip(result.seeds, result.per_seed):
                write_forecasts(self.out / f"forecast{suffix}_seed{seed}.csv", forecasts)
            logger.info(
                "'%s': %d seed ensemble in %s",
                group.name,
                len(seeds),
                time_formater(time.perf_counter() - started),
            )
            results[suffix] = result
        return results

    async def baseline(
        self,
        collection: SeriesCollection,
        kind: str,
        lags: int = DEFAULT_RIDGE_LAGS,
        lam: Optional[float] = None,
        method: str = "grid-cv",
    ) -> Dict[str, Dict[str, np.ndarray]]:
        """Benchmark forecasts in the forecast CSV schema, plus a JSON of the settings used"""
        if kind not in BASELINE_KINDS:
            raise ContractError(f"unknown baseline '{kind}', choose from {BASELINE_KINDS}")

        @run_sync
        def run(group: SeriesCollection) -> Tuple[Dict[str, np.ndarray], dict]:
            if kind == "snaive":
                return seasonal_naive_forecasts(group), {"kind": kind, "period": group.period}
            pooled = kind == "ridge-pooled"
            chosen = lam
            if chosen is None:
                chosen = tune_ridge_lambda(group, lags, pooled, method, seed=self.seed)
            models = fit_ridge(group, lags, chosen, pooled)
            meta = {"kind": kind, "lags": lags, "lambda": chosen, "method": method if lam is None else "fixed"}
            return ridge_forecasts(models, group), meta

        results = {}
        for suffix, group in self.groups(collection).items():
            forecasts, meta = await run(group)
            write_forecasts(self.out / f"baseline_{kind}{suffix}.csv", forecasts)
            (self.out / f"baseline_{kind}{suffix}.json").write_text(
                json.dumps(meta, indent=4, sort_keys=True) + "\n", encoding="utf-8"
            )
            results[suffix] = forecasts
        return results

    async def evaluate(
        self,
        forecast_paths: Sequence[Union[str, Path]],
        truth_path: Union[str, Path],
        collection: Optional[SeriesCollection] = None,
        variant: str = "modified",
        halve: bool = True,
    ) -> List[EvaluationReport]:
        """Score forecast files against the truth; writes `metrics.tsv` and `summary.tsv`

        MASE needs the observed history, taken from `collection` when given.
        """
        actuals = read_forecasts(truth_path)
        insample, period = None, 1
        if collection is not None:
            insample = {item.id: item.values for item in collection}
            period = collection.period
        reports = []
        for path in map(Path, forecast_paths):
            forecasts = read_forecasts(path)
            reports.append(
                evaluate_model(
                    path.stem,
                    forecasts,
                    actuals,
                    insample=insample,
                    period=period,
                    variant=variant,
                    halve=halve,
                )
            )
        write_tsv(metrics_table(reports), self.out / "metrics.tsv")
        write_tsv(summary_table(reports), self.out / "summary.tsv")
        for report in reports:
            logger.info(
                "%s: mean smape %.4f, mean mase %.4f",
                report.model_label,
                report.aggregates["mean_smape"],
                report.aggregates["mean_mase"],
            )
        return reports
