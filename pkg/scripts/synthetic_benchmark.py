"""Desk-scale benchmark on synthetic seasonal series

Tunes and ensembles a stacked peephole-LSTM (COCOB) with both pipelines,
on phase-aligned and phase-randomized series, and compares each against
the seasonal naive forecast on the held out last horizon.

    poetry run python scripts/synthetic_benchmark.py --out bench
"""
import argparse
import asyncio
import logging

from pathlib import Path

from globalrnn import Study
from globalrnn.baselines import seasonal_naive_forecasts
from globalrnn.data import synthetic_collection, write_forecasts
from globalrnn.evaluation import evaluate_model, summary_table, write_tsv
from globalrnn.types import ArchitectureKind, CellKind, ModelConfig, OptimizerKind, Pipeline


parser = argparse.ArgumentParser()
parser.add_argument("--out", type=Path, default=Path("benchmark"))
parser.add_argument("--series", type=int, default=100)
parser.add_argument("--iterations", type=int, default=15)
parser.add_argument("--seeds", type=int, default=3)
parser.add_argument("--jobs", type=int, default=4)
args = parser.parse_args()

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
HORIZON = 12


def held_out(aligned: bool):
    full = synthetic_collection(
        n_series=args.series, length=120, horizon=HORIZON, noise=0.1, aligned=aligned, seed=0
    )
    history = full.subset([item.with_values(item.values[:-HORIZON]) for item in full])
    truth = {item.id: item.values[-HORIZON:] for item in full}
    return history, truth


async def run(aligned: bool):
    history, truth = held_out(aligned)
    label = "aligned" if aligned else "random_phase"
    reports = [evaluate_model("snaive", seasonal_naive_forecasts(history), truth)]
    for pipeline in Pipeline:
        fixed = ModelConfig(
            architecture=ArchitectureKind.STACKED_MW,
            cell=CellKind.LSTM_PEEPHOLE,
            optimizer=OptimizerKind.COCOB,
            pipeline=pipeline,
        )
        async with Study(args.out / label / pipeline.value, jobs=args.jobs) as study:
            tuned = await study.tune(history, fixed, iterations=args.iterations)
            result = (await study.forecast(history, tuned[""].best_config, range(args.seeds)))[""]
        reports.append(evaluate_model(pipeline.value, result.ensemble, truth))
    write_forecasts(args.out / label / "truth.csv", truth)
    summary = summary_table(reports)
    write_tsv(summary, args.out / label / "summary.tsv")
    print(label)
    print(summary[["model", "mean_smape", "median_smape", "mean_rank_smape"]].to_string(index=False))


async def main():
    for aligned in (True, False):
        await run(aligned)


asyncio.run(main())
