import json
import logging

import numpy as np
import pandas as pd
import pytest

from globalrnn.cli import build_parser, main
from globalrnn.data import synthetic_collection, write_forecasts
from globalrnn.types import (
    ArchitectureKind,
    CellKind,
    Hyperparameters,
    ModelConfig,
    OptimizerKind,
)


@pytest.fixture(autouse=True)
def no_cache_override(monkeypatch):
    monkeypatch.delenv("FORECAST_CACHE_DIR", raising=False)


def write_dataset(folder, n_series=6, length=60, keep=None, name="syn"):
    """Series file + manifest; `keep` truncates every series and returns the cut-off future"""
    collection = synthetic_collection(n_series=n_series, length=length, seed=4)
    history = {item.id: item.values[:keep] for item in collection}
    future = {item.id: item.values[keep:] for item in collection} if keep else None
    write_forecasts(folder / "series.csv", history)
    manifest = folder / f"{name}.json"
    manifest.write_text(
        json.dumps({"name": name, "files": ["series.csv"], "period": 12, "horizon": 12})
    )
    if future is not None:
        write_forecasts(folder / "truth.csv", future)
    return manifest


def write_config(path, architecture=ArchitectureKind.STACKED_MW):
    ModelConfig(
        architecture=architecture,
        cell=CellKind.GRU,
        optimizer=OptimizerKind.COCOB,
        hyperparameters=Hyperparameters(minibatch_size=3, epochs=2, epoch_size=1, cell_dim=4),
    ).save(path)
    return path


def test_parser_defaults():
    args = build_parser().parse_args(["tune", "data.json"])
    assert args.iterations == 50 and args.seed == 0 and args.jobs == 1
    args = build_parser().parse_args(["baseline", "data.json", "--kind", "ridge-pooled"])
    assert args.lags == 10 and args.lam is None
    assert build_parser().parse_args(["forecast", "d.json", "--config", "c.json", "--seeds", "1,2,3"]).seeds == [1, 2, 3]


@pytest.mark.parametrize(
    "argv",
    [
        ["baseline", "data.json", "--kind", "arima"],
        ["forecast", "d.json", "--config", "c.json", "--seeds", "1,x"],
        ["forecast", "d.json"],
        [],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args(argv)
    assert e.value.code == 2


def test_missing_manifest_exit_code(tmp_path):
    assert main(["--out", str(tmp_path / "out"), "preprocess", str(tmp_path / "nope.json")]) == 2


def test_bad_manifest_exit_code(tmp_path):
    (tmp_path / "bad.json").write_text("{")
    assert main(["--out", str(tmp_path / "out"), "baseline", str(tmp_path / "bad.json"), "--kind", "snaive"]) == 2


def test_short_series_exit_code(tmp_path):
    manifest = write_dataset(tmp_path, length=20)
    assert main(["--out", str(tmp_path / "out"), "preprocess", str(manifest)]) == 3


def test_preprocess_lists_blocks(tmp_path, capsys):
    manifest = write_dataset(tmp_path, n_series=2)
    assert main(["--out", str(tmp_path / "out"), "preprocess", str(manifest)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "S001\ttrain\t21" in lines
    assert "S002\ttest\t45" in lines
    assert list((tmp_path / "out" / "cache").rglob("*.win"))
    strength = pd.read_csv(tmp_path / "out" / "seasonality.tsv", sep="\t")
    assert strength["series"].tolist() == ["S001", "S002"]
    assert (strength["period"] == 12).all()
    assert strength["strength"].between(0.0, 1.0).all()
    assert strength["strength"].median() > 0.5


def test_baseline_and_evaluate(tmp_path):
    manifest = write_dataset(tmp_path, keep=48)
    out = tmp_path / "out"
    assert main(["--out", str(out), "baseline", str(manifest), "--kind", "snaive"]) == 0
    assert main(["--out", str(out), "baseline", str(manifest), "--kind", "ridge-pooled", "--lags", "3"]) == 0
    meta = json.loads((out / "baseline_ridge-pooled.json").read_text())
    assert meta["lags"] == 3 and 0.0 <= meta["lambda"] <= 1.0
    code = main(
        [
            "--out",
            str(out),
            "evaluate",
            str(out / "baseline_snaive.csv"),
            str(out / "baseline_ridge-pooled.csv"),
            "--truth",
            str(tmp_path / "truth.csv"),
            "--manifest",
            str(manifest),
        ]
    )
    assert code == 0
    summary = pd.read_csv(out / "summary.tsv", sep="\t")
    assert summary["model"].tolist() == ["baseline_snaive", "baseline_ridge-pooled"]
    assert summary["mean_rank_smape"].sum() == pytest.approx(3.0)
    assert (summary["mean_mase"] > 0).all()
    metrics = pd.read_csv(out / "metrics.tsv", sep="\t")
    assert len(metrics) == 12


def test_evaluate_rejects_mismatched_ids(tmp_path):
    write_forecasts(tmp_path / "f.csv", {"a": np.ones(2)})
    write_forecasts(tmp_path / "t.csv", {"b": np.ones(2)})
    code = main(["--out", str(tmp_path / "out"), "evaluate", str(tmp_path / "f.csv"), "--truth", str(tmp_path / "t.csv")])
    assert code == 3


@pytest.mark.slow
def test_tune_writes_trials_and_best_config(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="globalrnn")
    manifest = write_dataset(tmp_path)
    space = tmp_path / "space.json"
    space.write_text(
        json.dumps(
            {
                "minibatch_size": [2, 4],
                "epochs": [1, 2],
                "epoch_size": [1, 1],
                "noise_sigma": [0.0001, 0.0002],
                "l2_psi": [0.0001, 0.0002],
                "cell_dim": [3, 5],
                "layers": [1, 1],
                "init_sigma": [0.0001, 0.0002],
            }
        )
    )
    config = write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    args = ["--out", str(out), "tune", str(manifest), "--config", str(config), "--space", str(space)]
    assert main([*args, "--iterations", "3", "--no-timings"]) == 0
    trials = pd.read_csv(out / "trials.csv")
    assert trials["trial"].tolist() == [1, 2, 3]
    assert (trials["seconds"] == 0).all()
    best = ModelConfig.load(out / "best_config.json")
    assert best.cell is CellKind.GRU
    assert 3 <= best.hyperparameters.cell_dim <= 5
    assert (out / "trials.db").is_file()
    assert not [r for r in caplog.records if "stored run" in r.getMessage()]
    assert main([*args, "--iterations", "2", "--no-timings"]) == 0
    stored = [r.getMessage() for r in caplog.records if "stored run" in r.getMessage()]
    assert len(stored) == 1
    assert "has 3 trials" in stored[0]


@pytest.mark.slow
@pytest.mark.parametrize("architecture", [ArchitectureKind.STACKED_MW, ArchitectureKind.S2S_DECODER_NMW])
def test_forecast_is_reproducible(tmp_path, architecture):
    manifest = write_dataset(tmp_path, keep=48)
    config = write_config(tmp_path / "config.json", architecture)
    outputs = []
    for run, jobs in (("one", "1"), ("two", "1"), ("parallel", "2")):
        out = tmp_path / run
        code = main(
            ["--out", str(out), "--jobs", jobs, "forecast", str(manifest), "--config", str(config), "--seeds", "1,2,3", "--checkpoints"]
        )
        assert code == 0
        outputs.append((out / "forecast.csv").read_bytes())
        for seed in (1, 2, 3):
            assert (out / f"forecast_seed{seed}.csv").is_file()
            assert (out / "checkpoints" / f"seed_{seed}.ckpt").is_file()
    assert outputs[0] == outputs[1] == outputs[2]
    forecast = pd.read_csv(tmp_path / "one" / "forecast.csv", index_col="id")
    assert forecast.shape == (6, 12)
    assert (forecast.to_numpy() >= 0).all()


def test_snaive_scores_zero_on_periodic_series(tmp_path):
    cycle = [3.0, 5.0, 4.0, 8.0]
    write_forecasts(tmp_path / "series.csv", {"p": np.array(cycle * 4)})
    (tmp_path / "p.json").write_text(
        json.dumps({"name": "p", "files": ["series.csv"], "period": 4, "horizon": 4})
    )
    write_forecasts(tmp_path / "truth.csv", {"p": np.array(cycle)})
    out = tmp_path / "out"
    assert main(["--out", str(out), "baseline", str(tmp_path / "p.json"), "--kind", "snaive"]) == 0
    code = main(["--out", str(out), "evaluate", str(out / "baseline_snaive.csv"), "--truth", str(tmp_path / "truth.csv")])
    assert code == 0
    metrics = pd.read_csv(out / "metrics.tsv", sep="\t")
    assert metrics["smape"].tolist() == [0.0]
