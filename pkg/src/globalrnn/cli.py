__all__ = ["main", "build_parser"]

import argparse
import asyncio
import logging
import sys

from pathlib import Path
from typing import List, Optional

from globalrnn.constants import DEFAULT_RIDGE_LAGS, DEFAULT_SEED_COUNT, DEFAULT_TUNING_ITERATIONS
from globalrnn.exceptions import ForecastError, InputError
from globalrnn.main import BASELINE_KINDS, Study
from globalrnn.types import HyperparameterSpace, ModelConfig


logger = logging.getLogger("globalrnn")


def _seed_list(text: str) -> List[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma separated list of integers")
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is needed")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="globalrnn",
        description="Global recurrent-network forecasting across many related time series",
    )
    parser.add_argument("--seed", type=int, default=0, help="root seed of every random stream")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for seeds")
    parser.add_argument("--out", type=Path, default=Path("output"), help="output directory")
    parser.add_argument("--cache", type=Path, default=None, help="window cache directory")
    parser.add_argument("--clean-cache", action="store_true", help="drop cached windows first")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    pre = commands.add_parser("preprocess", help="build and cache the windows of every stage")
    pre.add_argument("manifest", type=Path)
    pre.add_argument("--config", type=Path, help="model config JSON (default settings otherwise)")

    tune = commands.add_parser("tune", help="search hyperparameters on the validation split")
    tune.add_argument("manifest", type=Path)
    tune.add_argument("--config", type=Path, help="fixed architecture / cell / optimizer / pipeline")
    space = tune.add_mutually_exclusive_group()
    space.add_argument("--space", type=Path, help="hyperparameter space JSON")
    space.add_argument("--preset", help="named initial ranges, e.g. cif12 or m4_micro")
    tune.add_argument("--param-budget", action="store_true", help="tune a parameter budget instead of the cell dimension")
    tune.add_argument("--iterations", type=int, default=DEFAULT_TUNING_ITERATIONS)
    tune.add_argument("--no-timings", action="store_true", help="write 0 seconds to the trial log")

    forecast = commands.add_parser("forecast", help="retrain per seed on full series and ensemble")
    forecast.add_argument("manifest", type=Path)
    forecast.add_argument("--config", type=Path, required=True)
    forecast.add_argument("--seeds", type=_seed_list, help="comma separated seeds (default: 10 from --seed)")
    forecast.add_argument("--checkpoints", action="store_true", help="save network and optimizer state per seed")

    evaluate = commands.add_parser("evaluate", help="score forecast CSVs against the truth")
    evaluate.add_argument("forecasts", type=Path, nargs="+")
    evaluate.add_argument("--truth", type=Path, required=True)
    evaluate.add_argument("--manifest", type=Path, help="observed history, enables MASE")
    evaluate.add_argument("--smape", choices=("standard", "modified"), default="modified")
    evaluate.add_argument("--no-halve", action="store_true", help="modified SMAPE without the /2 of the denominator")

    baseline = commands.add_parser("baseline", help="seasonal naive or ridge autoregression forecasts")
    baseline.add_argument("manifest", type=Path)
    baseline.add_argument("--kind", choices=BASELINE_KINDS, required=True)
    baseline.add_argument("--lags", type=int, default=DEFAULT_RIDGE_LAGS)
    baseline.add_argument("--lambda", dest="lam", type=float, default=None, help="fixed L2 strength, tuned otherwise")
    baseline.add_argument("--lambda-method", choices=("grid-cv", "smbo"), default="grid-cv")
    return parser


def _config(path: Optional[Path]) -> ModelConfig:
    return ModelConfig() if path is None else ModelConfig.load(path)


async def _run(args: argparse.Namespace) -> None:
    async with Study(
        args.out,
        seed=args.seed,
        jobs=args.jobs,
        cache_path=args.cache,
        clean_cache=args.clean_cache,
        timings=not getattr(args, "no_timings", False),
    ) as study:
        if args.command == "evaluate":
            collection = Study.load(args.manifest)[1] if args.manifest else None
            await study.evaluate(
                args.forecasts,
                args.truth,
                collection,
                variant=args.smape,
                halve=not args.no_halve,
            )
            return
        manifest, collection = Study.load(args.manifest)
        if args.command == "preprocess":
            for series_id, stage, blocks in await study.preprocess(collection, _config(args.config)):
                print(f"{series_id}\t{stage}\t{blocks}")
        elif args.command == "tune":
            fixed = _config(args.config)
            space = None
            if args.space:
                space = HyperparameterSpace.load(args.space)
            elif args.preset or manifest.preset:
                space = HyperparameterSpace.preset(args.preset or manifest.preset, fixed.optimizer)
            if args.param_budget:
                base = space or HyperparameterSpace.default(len(collection), fixed.optimizer)
                space = base.with_param_budget()
            await study.tune(collection, fixed, space, args.iterations)
        elif args.command == "forecast":
            seeds = args.seeds or [args.seed + i for i in range(DEFAULT_SEED_COUNT)]
            await study.forecast(collection, _config(args.config), seeds, args.checkpoints)
        elif args.command == "baseline":
            await study.baseline(collection, args.kind, args.lags, args.lam, args.lambda_method)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        asyncio.run(_run(args))
    except FileNotFoundError as e:
        logger.error("File not found: %s", e.filename or e)
        return InputError.exit_code
    except ForecastError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    return 0
