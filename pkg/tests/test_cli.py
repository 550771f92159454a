"""Config parsing and the command-line workflow end to end."""

import csv
import dataclasses
import json
import subprocess
import zipfile
from pathlib import Path

import numpy as np
import pytest

from matrix_trader.algo import A2cConfig, PpoConfig
from matrix_trader.cli.config import (
    ConfigError,
    DatasetSpecConfig,
    ExperimentConfig,
    build_policy_spec,
    load_config,
    write_resolved,
)
from matrix_trader.cli.main import COMPARE_CELLS, main
from matrix_trader.data.records import FUNDAMENTAL_FIELDS
from matrix_trader.data.store import load_dataset
from matrix_trader.features import FeatureLayout
from matrix_trader.nets import load_checkpoint, save_checkpoint
from matrix_trader.nets.policies import CnnSpec, MlpSpec

MICRO_CONFIG = """\
[dataset]
kind = path
path = {dataset}

[env]
window = 90
initial_balance = 100000

[policy]
kind = cnn
channels = 2,4
dense = 8

[algo]
kind = ppo
horizon = 16
epochs = 1
minibatch_size = 16
total_steps = 32

[run]
seed = 5
normalize = true
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def dataset_dir(workdir):
    synth_cfg = workdir / "synth.ini"
    synth_cfg.write_text(
        "[dataset]\nkind = synthetic\nseed = 3\ndays = 120\ntickers = 2\n"
        "regime = uptrend\n"
    )
    out = workdir / "dataset"
    assert main(["--quiet", "synth", "--config", str(synth_cfg),
                 "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def micro_config(workdir, dataset_dir):
    path = workdir / "exp.ini"
    path.write_text(MICRO_CONFIG.format(dataset=dataset_dir))
    return path


@pytest.fixture(scope="module")
def train_out(workdir, micro_config):
    out = workdir / "run1"
    assert main(["--quiet", "train", "--config", str(micro_config),
                 "--out", str(out)]) == 0
    return out


# -------------------------------------------------------------- config --

def test_load_config_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    assert load_config(path) == ExperimentConfig()


def test_load_config_micro_values(micro_config, dataset_dir):
    cfg = load_config(micro_config)
    assert cfg.dataset == DatasetSpecConfig(kind="path", path=str(dataset_dir))
    assert cfg.env.window == 90 and cfg.env.initial_balance == 100000.0
    assert cfg.policy.kind == "cnn" and cfg.policy.channels == (2, 4)
    assert cfg.algo == PpoConfig(horizon=16, epochs=1, minibatch_size=16,
                                 total_steps=32)
    assert cfg.run.seed == 5 and cfg.run.normalize is True


def test_write_resolved_round_trips(tmp_path, micro_config):
    cfg = load_config(micro_config)
    resolved = tmp_path / "resolved.ini"
    write_resolved(cfg, resolved)
    assert load_config(resolved) == cfg


def test_write_resolved_round_trips_a2c_and_split(tmp_path):
    src = tmp_path / "a2c.ini"
    src.write_text(
        "[dataset]\nkind = synthetic\nsplit_fraction = 0.8\n"
        "[algo]\nkind = a2c\nrms_alpha = 0.95\ntotal_steps = 40\n"
        "[policy]\nkind = mlp\nhidden = 32,16\n"
    )
    cfg = load_config(src)
    assert cfg.algo == A2cConfig(rms_alpha=0.95, total_steps=40)
    assert cfg.dataset.split_fraction == 0.8
    assert cfg.policy.hidden == (32, 16)
    resolved = tmp_path / "resolved.ini"
    write_resolved(cfg, resolved)
    assert load_config(resolved) == cfg


def test_unknown_key_and_section_reported_together(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[oops]\nx = 1\n[algo]\ngama = 0.9\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    msg = str(err.value)
    assert "oops" in msg and "algo.gama" in msg


def test_ppo_only_key_rejected_under_a2c(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[algo]\nkind = a2c\nclip_ratio = 0.2\n")
    with pytest.raises(ConfigError, match="clip_ratio"):
        load_config(path)


def test_bad_numeric_value_reported(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[env]\nwindow = ninety\n")
    with pytest.raises(ConfigError, match="window"):
        load_config(path)


def test_split_fraction_none_and_bounds(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[dataset]\nsplit_fraction = none\n")
    assert load_config(path).dataset.split_fraction is None
    path.write_text("[dataset]\nsplit_fraction = 1.5\n")
    with pytest.raises(ConfigError, match="split_fraction"):
        load_config(path)


def test_dataset_path_kind_requires_path(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[dataset]\nkind = path\n")
    with pytest.raises(ConfigError, match="path"):
        load_config(path)


def test_build_policy_spec_widths():
    cfg = ExperimentConfig()
    spec = build_policy_spec(cfg.policy, "cnn", window=90, n_assets=2)
    assert spec == CnnSpec(window=90, width=FeatureLayout(2).width, n_actions=2)
    spec = build_policy_spec(cfg.policy, "mlp", window=90, n_assets=3)
    assert spec == MlpSpec(width=FeatureLayout(3).width, n_actions=3,
                           hidden=(64, 64))


# ---------------------------------------------------------------- synth --

def test_synth_dataset_loads_and_is_deterministic(workdir, dataset_dir):
    ds = load_dataset(dataset_dir)
    assert ds.n_assets == 2 and ds.n_days == 120
    again = workdir / "dataset2"
    synth_cfg = workdir / "synth.ini"
    assert main(["--quiet", "synth", "--config", str(synth_cfg),
                 "--out", str(again)]) == 0
    for member in ("meta.json", "prices.csv", "ratios.csv"):
        assert (again / member).read_bytes() == (dataset_dir / member).read_bytes()


def test_synth_seed_override_changes_data(workdir):
    synth_cfg = workdir / "synth.ini"
    out = workdir / "dataset-seed9"
    assert main(["--quiet", "synth", "--config", str(synth_cfg), "--seed", "9",
                 "--out", str(out)]) == 0
    assert (out / "prices.csv").read_bytes() != (
        (workdir / "dataset") / "prices.csv"
    ).read_bytes()


def test_synth_rejects_path_dataset_config(tmp_path):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[dataset]\nkind = path\npath = /nonexistent\n")
    assert main(["--quiet", "synth", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 1


# ---------------------------------------------------------------- train --

def test_train_writes_expected_outputs(train_out):
    for name in ("history.csv", "train_equity.csv", "trades.csv",
                 "checkpoint.zip", "resolved.ini"):
        assert (train_out / name).exists(), name
    with (train_out / "history.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 2  # header + ceil(32 / 16) updates
    spec, params, env_dict, stats, meta = load_checkpoint(train_out / "checkpoint.zip")
    assert spec.kind == "cnn" and spec.n_actions == 2
    assert env_dict["initial_balance"] == 100000.0
    assert meta == {"seed": 5, "env_steps": 32}
    assert stats is not None  # normalize = true


def test_train_resolved_config_reproduces_run(train_out, micro_config):
    cfg = load_config(train_out / "resolved.ini")
    original = load_config(micro_config)
    assert cfg.algo == original.algo
    assert cfg.env == original.env
    assert dataclasses.replace(cfg.run, out=original.run.out) == original.run


def test_train_byte_deterministic(workdir, micro_config, train_out):
    out2 = workdir / "run2"
    assert main(["--quiet", "train", "--config", str(micro_config),
                 "--out", str(out2)]) == 0
    for name in ("history.csv", "train_equity.csv", "trades.csv", "checkpoint.zip"):
        assert (out2 / name).read_bytes() == (train_out / name).read_bytes(), name


def test_train_seed_override_changes_history(workdir, micro_config, train_out):
    out3 = workdir / "run3"
    assert main(["--quiet", "train", "--config", str(micro_config),
                 "--seed", "6", "--out", str(out3)]) == 0
    assert (out3 / "history.csv").read_bytes() != (
        train_out / "history.csv"
    ).read_bytes()


def test_train_missing_config_exits_nonzero(tmp_path):
    assert main(["--quiet", "train", "--config", str(tmp_path / "nope.ini")]) == 1


def test_train_unknown_config_key_exits_nonzero(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[algo]\ngama = 0.9\n")
    assert main(["--quiet", "train", "--config", str(cfg)]) == 1


# ------------------------------------------------------------- evaluate --

def test_evaluate_prints_report_and_writes_files(train_out, dataset_dir,
                                                 tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(["--quiet", "evaluate", str(train_out / "checkpoint.zip"),
                 str(dataset_dir), "--out", str(out)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["final_value"] > 0
    assert report["n_trades"] >= 0
    for name in ("report.json", "equity.csv", "trades.csv"):
        assert (out / name).exists()
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk == report


def test_evaluate_zeroed_actor_holds_initial_balance(train_out, dataset_dir,
                                                     tmp_path, capsys):
    spec, params, env_dict, stats, meta = load_checkpoint(
        train_out / "checkpoint.zip"
    )
    params.set_array("actor.weight",
                     np.zeros_like(params.array("actor.weight")))
    params.set_array("actor.bias", np.zeros_like(params.array("actor.bias")))
    held = tmp_path / "hold.zip"
    save_checkpoint(held, spec, params, env_dict, stats, meta)

    code = main(["--quiet", "evaluate", str(held), str(dataset_dir)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    # zero actor -> zero mean action -> zero shares: a pure hold
    assert report["final_value"] == 100000.0
    assert report["total_cost"] == 0.0
    assert report["n_trades"] == 0
    assert report["sharpe_daily"] is None
    assert report["max_drawdown"] == 0.0


def test_evaluate_bad_checkpoint_exits_nonzero(dataset_dir, tmp_path):
    bad = tmp_path / "bad.zip"
    bad.write_bytes(b"not a zip")
    assert main(["--quiet", "evaluate", str(bad), str(dataset_dir)]) == 1


def test_evaluate_rejects_undersized_split(train_out, dataset_dir):
    # test side of a 0.9 split is 12 days, below the 90-day window
    code = main(["--quiet", "evaluate", str(train_out / "checkpoint.zip"),
                 str(dataset_dir), "--split-fraction", "0.9", "--split", "test"])
    assert code == 1


# -------------------------------------------------------------- compare --

def test_compare_grid(workdir, micro_config):
    out = workdir / "grid"
    assert main(["--quiet", "compare", "--config", str(micro_config),
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["completed"] == list(COMPARE_CELLS)
    assert manifest["failed"] == {}
    for cell in COMPARE_CELLS:
        for name in ("history.csv", "train_equity.csv", "trades.csv",
                     "checkpoint.zip"):
            assert (out / cell / name).exists(), f"{cell}/{name}"
    with (out / "comparison.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 2  # header + shared update count
    assert rows[0][0] == "update_idx"
    assert len(rows[0]) == 1 + 3 * len(COMPARE_CELLS)
    # spot-check one column binding: each cell's cost column matches its
    # own history file
    from matrix_trader.algo import load_history
    for k, cell in enumerate(COMPARE_CELLS):
        hist = load_history(out / cell / "history.csv")
        col = 1 + 3 * k + 2
        assert float(rows[-1][col]) == hist[-1].total_cost


def test_compare_checkpoints_differ_across_cells(workdir):
    out = workdir / "grid"
    blobs = {
        cell: (out / cell / "checkpoint.zip").read_bytes()
        for cell in COMPARE_CELLS
    }
    assert len(set(blobs.values())) == len(COMPARE_CELLS)


# --------------------------------------------------------------- ingest --

def fundamentals_row(report_date, ticker):
    values = {
        "current_assets": 500.0, "cash": 120.0, "inventory": 80.0,
        "current_liabilities": 200.0, "total_liabilities": 900.0,
        "total_assets": 2000.0, "equity": 1100.0, "cogs": 640.0,
        "receivables": 160.0, "payables": 128.0, "revenue": 1600.0,
        "operating_income": 240.0, "net_income": 176.0,
        "shares_outstanding": 44.0, "dividends_paid": 11.0,
    }
    return [report_date, ticker] + [repr(values[f]) for f in FUNDAMENTAL_FIELDS]


def test_ingest_builds_intersection_calendar(tmp_path, capsys):
    prices = tmp_path / "prices.csv"
    with prices.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "ticker", "close"))
        for day in ("2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04"):
            w.writerow((day, "AAA", "100.0"))
        for day in ("2020-01-01", "2020-01-02", "2020-01-04"):  # 01-03 missing
            w.writerow((day, "BBB", "50.0"))
    funds = tmp_path / "funds.csv"
    with funds.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("report_date", "ticker") + FUNDAMENTAL_FIELDS)
        w.writerow(fundamentals_row("2019-12-31", "AAA"))
        w.writerow(fundamentals_row("2019-12-31", "BBB"))

    out = tmp_path / "ds"
    assert main(["--quiet", "ingest", str(prices), str(funds),
                 "--out", str(out)]) == 0
    ds = load_dataset(out)
    assert ds.tickers == ("AAA", "BBB")
    assert [d.isoformat() for d in ds.calendar] == [
        "2020-01-01", "2020-01-02", "2020-01-04"
    ]
    np.testing.assert_array_equal(ds.prices[:, 0], 100.0)
    np.testing.assert_array_equal(ds.prices[:, 1], 50.0)

    again = tmp_path / "ds2"
    assert main(["--quiet", "ingest", str(prices), str(funds),
                 "--out", str(again)]) == 0
    for member in ("meta.json", "prices.csv", "ratios.csv"):
        assert (again / member).read_bytes() == (out / member).read_bytes()


def test_ingest_missing_file_exits_nonzero(tmp_path):
    assert main(["--quiet", "ingest", str(tmp_path / "no.csv"),
                 str(tmp_path / "no2.csv"), "--out", str(tmp_path / "d")]) == 1


# ------------------------------------------------------- console script --

def test_console_script_help():
    proc = subprocess.run(["matrix-trader", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    for sub in ("ingest", "synth", "train", "evaluate", "compare"):
        assert sub in proc.stdout
