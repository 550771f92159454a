"""Command-line entry point.

Subcommands: ingest (raw CSVs -> dataset directory), synth (seeded
synthetic dataset), train (one experiment from a config file), evaluate
(greedy rollout of a checkpoint), and compare (the 2x2 policy/trainer
grid on a shared dataset and seed).

Log level comes from MATRIX_TRADER_LOG (default INFO); --quiet forces
ERROR. Exit status is 0 exactly when the command finished without error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

from matrix_trader.algo import A2cConfig, PpoConfig, Policy, evaluate, train, write_history
from matrix_trader.algo.driver import TrainResult, write_equity
from matrix_trader.cli.config import (
    ConfigError,
    ExperimentConfig,
    build_policy_spec,
    load_config,
    write_resolved,
)
from matrix_trader.data.align import MarketDataset, align_and_fill, split_by_fraction
from matrix_trader.data.loaders import load_fundamentals, load_prices
from matrix_trader.data.store import load_dataset, save_dataset
from matrix_trader.data.synthetic import generate_synthetic_market
from matrix_trader.env import EnvConfig
from matrix_trader.nets import load_checkpoint, save_checkpoint

log = logging.getLogger("matrix_trader.cli")

COMPARE_CELLS = ("cnn_ppo", "cnn_a2c", "mlp_ppo", "mlp_a2c")


def _setup_logging(quiet: bool) -> None:
    name = os.environ.get("MATRIX_TRADER_LOG", "INFO").strip().upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.INFO
    if quiet:
        level = logging.ERROR
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def _resolve_dataset(cfg: ExperimentConfig) -> MarketDataset:
    """Materialize the configured dataset; keep the train part if split."""
    ds_cfg = cfg.dataset
    if ds_cfg.kind == "path":
        ds = load_dataset(ds_cfg.path)
    else:
        ds = generate_synthetic_market(
            ds_cfg.seed, ds_cfg.days, ds_cfg.tickers, ds_cfg.regime
        )
    if ds_cfg.split_fraction is not None:
        ds, _ = split_by_fraction(ds, ds_cfg.split_fraction)
    return ds


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    run = cfg.run
    if args.seed is not None:
        run = dataclasses.replace(run, seed=args.seed)
    if args.out is not None:
        run = dataclasses.replace(run, out=args.out)
    return dataclasses.replace(cfg, run=run)


def _write_train_outputs(result: TrainResult, spec, env_cfg: EnvConfig,
                         out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_history(result.history, out / "history.csv")
    write_equity(result.env, out / "train_equity.csv")
    result.env.write_trade_log(out / "trades.csv")
    save_checkpoint(
        out / "checkpoint.zip",
        spec,
        result.policy.params,
        dataclasses.asdict(env_cfg),
        result.policy.stats,
        {"seed": result.seed, "env_steps": result.env_steps},
    )


def cmd_ingest(args) -> int:
    prices = load_prices(args.prices)
    fundamentals = load_fundamentals(args.fundamentals)
    ds = align_and_fill(prices, fundamentals)
    out = save_dataset(ds, args.out)
    log.info("ingested %d tickers x %d days -> %s", ds.n_assets, ds.n_days, out)
    print(f"wrote dataset: {out} ({ds.n_assets} tickers, {ds.n_days} days)")
    return 0


def cmd_synth(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    ds_cfg = cfg.dataset
    if ds_cfg.kind != "synthetic":
        raise ConfigError("synth requires dataset.kind = synthetic")
    seed = args.seed if args.seed is not None else ds_cfg.seed
    ds = generate_synthetic_market(seed, ds_cfg.days, ds_cfg.tickers, ds_cfg.regime)
    out = save_dataset(ds, args.out)
    print(f"wrote dataset: {out} ({ds.n_assets} tickers, {ds.n_days} days)")
    return 0


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    ds = _resolve_dataset(cfg)
    spec = build_policy_spec(cfg.policy, cfg.policy.kind, cfg.env.window, ds.n_assets)
    result = train(
        ds,
        spec,
        cfg.algo,
        env_cfg=cfg.env,
        seed=cfg.run.seed,
        n_envs=cfg.run.n_envs,
        normalize=cfg.run.normalize,
    )
    out = Path(cfg.run.out)
    _write_train_outputs(result, spec, cfg.env, out)
    write_resolved(cfg, out / "resolved.ini")
    print(f"trained {result.env_steps} steps -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    spec, params, env_dict, stats, meta = load_checkpoint(args.checkpoint)
    env_cfg = EnvConfig(**env_dict) if env_dict else EnvConfig()
    policy = Policy(spec=spec, params=params, stats=stats)

    ds = load_dataset(args.dataset)
    if args.split_fraction is not None:
        train_ds, test_ds = split_by_fraction(ds, args.split_fraction)
        ds = train_ds if args.split == "train" else test_ds
    report = evaluate(policy, ds, env_cfg=env_cfg, out_dir=args.out)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cell_configs(cfg: ExperimentConfig) -> dict[str, tuple[str, PpoConfig | A2cConfig]]:
    """Map each grid cell to (policy kind, trainer config).

    The configured trainer keeps its tuned settings; the other kind runs
    at its defaults with the same step budget.
    """
    if cfg.algo.kind == "ppo":
        ppo, a2c = cfg.algo, A2cConfig(total_steps=cfg.algo.total_steps)
    else:
        ppo, a2c = PpoConfig(total_steps=cfg.algo.total_steps), cfg.algo
    return {
        "cnn_ppo": ("cnn", ppo),
        "cnn_a2c": ("cnn", a2c),
        "mlp_ppo": ("mlp", ppo),
        "mlp_a2c": ("mlp", a2c),
    }


def _write_comparison(out: Path, histories: dict[str, list]) -> None:
    n_rows = min(len(h) for h in histories.values())
    header = ["update_idx"]
    for cell in COMPARE_CELLS:
        header += [f"{cell}_reward", f"{cell}_sharpe", f"{cell}_cost"]
    with (out / "comparison.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(n_rows):
            row: list = [i]
            for cell in COMPARE_CELLS:
                r = histories[cell][i]
                row += [repr(r.episode_reward), repr(r.sharpe), repr(r.total_cost)]
            w.writerow(row)


def cmd_compare(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    ds = _resolve_dataset(cfg)
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, out / "resolved.ini")

    # One shared update count so every cell logs the same number of rows.
    n_updates = math.ceil(cfg.algo.total_steps / cfg.algo.horizon)
    cells = _cell_configs(cfg)

    completed: list[str] = []
    failed: dict[str, str] = {}
    histories: dict[str, list] = {}
    for cell in COMPARE_CELLS:
        policy_kind, algo_cfg = cells[cell]
        try:
            spec = build_policy_spec(cfg.policy, policy_kind, cfg.env.window,
                                     ds.n_assets)
            result = train(
                ds,
                spec,
                algo_cfg,
                env_cfg=cfg.env,
                seed=cfg.run.seed,
                n_envs=cfg.run.n_envs,
                normalize=cfg.run.normalize,
                n_updates=n_updates,
            )
            _write_train_outputs(result, spec, cfg.env, out / cell)
            histories[cell] = result.history
            completed.append(cell)
            log.info("cell %s done: value=%.2f", cell,
                     result.history[-1].portfolio_value if result.history else 0.0)
        except Exception as exc:  # keep going; report per-cell failures
            log.error("cell %s failed: %s", cell, exc)
            failed[cell] = str(exc)

    manifest = {"completed": completed, "failed": failed}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    if failed:
        print(f"compare: {len(failed)} cell(s) failed, see {out / 'manifest.json'}")
        return 1
    _write_comparison(out, histories)
    print(f"compare: 4 cells -> {out / 'comparison.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matrix-trader",
        description="Stock-trading RL laboratory: data, environments, training.",
    )
    parser.add_argument("--quiet", action="store_true",
                        help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a dataset directory from raw CSVs")
    p.add_argument("prices", help="prices CSV (date,ticker,close)")
    p.add_argument("fundamentals", help="fundamentals CSV (report_date,ticker,...)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="experiment config (uses its [dataset] section)")
    p.add_argument("--seed", type=int, help="override the dataset seed")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one experiment from a config file")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="override run.out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="greedy rollout of a saved checkpoint")
    p.add_argument("checkpoint", help="checkpoint.zip from train/compare")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--split-fraction", type=float, dest="split_fraction",
                   help="split the dataset before evaluating")
    p.add_argument("--split", choices=("train", "test"), default="test",
                   help="which side of the split to evaluate (default test)")
    p.add_argument("--out", help="write report.json/equity.csv/trades.csv here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="train the 2x2 policy/trainer grid")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="override run.out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        return args.func(args)
    except Exception as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
