"""Training and evaluation drivers over a dataset, policy, and trainer."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from matrix_trader.algo.a2c import A2cConfig, a2c_update
from matrix_trader.algo.buffer import collect_rollout
from matrix_trader.algo.optim import Adam, RmsProp
from matrix_trader.algo.policy import Policy, make_policy
from matrix_trader.algo.ppo import PpoConfig, ppo_update
from matrix_trader.data.align import MarketDataset
from matrix_trader.env import EnvConfig, TradingEnv
from matrix_trader.features import FeatureLayout, stats_from_dataset
from matrix_trader.metrics import (
    EvaluationReport,
    UndefinedSharpeError,
    max_drawdown,
    sharpe,
    write_report,
)

log = logging.getLogger("matrix_trader.algo")

HISTORY_HEADER = (
    "update_idx", "env_steps", "episode_reward", "portfolio_value",
    "sharpe", "total_cost", "mean_turbulence",
)


@dataclass(frozen=True)
class HistoryRow:
    update_idx: int
    env_steps: int
    episode_reward: float
    portfolio_value: float
    sharpe: float  # nan when undefined (too few points or zero variance)
    total_cost: float
    mean_turbulence: float


@dataclass
class TrainResult:
    policy: Policy
    history: list[HistoryRow]
    env: TradingEnv  # primary env: trade log, equity curve, total cost
    env_steps: int
    seed: int


def write_history(rows: list[HistoryRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_HEADER)
        for r in rows:
            w.writerow([
                r.update_idx, r.env_steps,
                repr(r.episode_reward), repr(r.portfolio_value),
                repr(r.sharpe), repr(r.total_cost), repr(r.mean_turbulence),
            ])


def load_history(path) -> list[HistoryRow]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HISTORY_HEADER:
            raise ValueError(f"{path}: malformed history header {header}")
        for row in reader:
            rows.append(HistoryRow(
                update_idx=int(row[0]), env_steps=int(row[1]),
                episode_reward=float(row[2]), portfolio_value=float(row[3]),
                sharpe=float(row[4]), total_cost=float(row[5]),
                mean_turbulence=float(row[6]),
            ))
    return rows


def _sharpe_to_date(curve: list[float]) -> float:
    try:
        return sharpe(curve, 0.0, annualize=True)
    except (UndefinedSharpeError, ValueError):
        return float("nan")


def _make_update(policy, algo_cfg):
    tensors = policy.params.trainable()
    if algo_cfg.kind == "ppo":
        opt = Adam(tensors, lr=algo_cfg.lr)

        def update(buffers, rng):
            return ppo_update(policy, opt, buffers, algo_cfg, rng)

    elif algo_cfg.kind == "a2c":
        opt = RmsProp(tensors, lr=algo_cfg.lr, alpha=algo_cfg.rms_alpha,
                      eps=algo_cfg.rms_eps)

        def update(buffers, rng):
            return a2c_update(policy, opt, buffers, algo_cfg)

    else:
        raise ValueError(f"unknown trainer kind {algo_cfg.kind!r}")
    return update


def train(
    ds: MarketDataset,
    spec,
    algo_cfg: PpoConfig | A2cConfig,
    env_cfg: EnvConfig | None = None,
    seed: int = 0,
    n_envs: int = 1,
    normalize: bool = True,
    n_updates: int | None = None,
) -> TrainResult:
    """Alternate rollout collection and updates for ceil(total_steps /
    horizon) rounds (overridable via `n_updates`).

    Single-threaded when n_envs = 1 and then bit-deterministic per seed.
    With n_envs > 1, rollouts run in one thread per env with read-only
    parameters and merge in env order; reporting follows env 0.
    Reproducibility across thread timing is not guaranteed in that mode.
    """
    env_cfg = env_cfg or EnvConfig()
    layout = FeatureLayout(ds.n_assets)
    if spec.width != layout.width:
        raise ValueError(
            f"policy expects width {spec.width}, dataset has {layout.width}"
        )
    if n_envs < 1:
        raise ValueError(f"n_envs must be >= 1, got {n_envs}")
    stats = (
        stats_from_dataset(ds, env_cfg.initial_balance, env_cfg.hmax)
        if normalize else None
    )
    policy = make_policy(spec, seed, stats)
    update = _make_update(policy, algo_cfg)

    root = np.random.SeedSequence(seed)
    rollout_seqs = root.spawn(n_envs + 1)
    rng = np.random.default_rng(rollout_seqs[0])  # update-time shuffling
    env_rngs = [np.random.default_rng(s) for s in rollout_seqs[1:]]

    envs = [TradingEnv(ds, env_cfg) for _ in range(n_envs)]
    for env in envs:
        env.reset(0)

    if n_updates is None:
        n_updates = math.ceil(algo_cfg.total_steps / algo_cfg.horizon)

    history: list[HistoryRow] = []
    episode_reward = 0.0
    env_steps = 0
    pool = ThreadPoolExecutor(max_workers=n_envs) if n_envs > 1 else None
    try:
        for u in range(n_updates):
            if pool is None:
                buffers = [collect_rollout(envs[0], policy, algo_cfg.horizon, env_rngs[0])]
            else:
                buffers = list(pool.map(
                    lambda pair: collect_rollout(pair[0], policy, algo_cfg.horizon, pair[1]),
                    zip(envs, env_rngs),
                ))
            env_steps += algo_cfg.horizon * n_envs
            diag = update(buffers, rng)
            if diag.get("aborted"):
                log.warning("update %d aborted on non-finite loss", u)
            policy.refresh_bn(np.concatenate([b.obs for b in buffers]))

            for r, d in zip(buffers[0].rewards, buffers[0].dones):
                episode_reward = float(episode_reward + float(r))
                if d:
                    episode_reward = 0.0
            turb = float(np.mean([info["turbulence"] for info in buffers[0].infos]))
            history.append(HistoryRow(
                update_idx=u,
                env_steps=env_steps,
                episode_reward=episode_reward,
                portfolio_value=envs[0].current_value(),
                sharpe=_sharpe_to_date(envs[0].equity_curve),
                total_cost=envs[0].total_cost,
                mean_turbulence=turb,
            ))
            log.info(
                "update %d/%d steps=%d value=%.2f loss=%s",
                u + 1, n_updates, env_steps,
                history[-1].portfolio_value, diag.get("loss"),
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return TrainResult(policy=policy, history=history, env=envs[0],
                       env_steps=env_steps, seed=seed)


def evaluate(
    policy: Policy,
    ds: MarketDataset,
    env_cfg: EnvConfig | None = None,
    out_dir: str | Path | None = None,
) -> EvaluationReport:
    """Deterministic greedy rollout (action = mean) over one full episode.

    Optionally writes report.json, equity.csv, and trades.csv to out_dir.
    """
    env_cfg = env_cfg or EnvConfig()
    layout = FeatureLayout(ds.n_assets)
    if policy.spec.width != layout.width:
        raise ValueError(
            f"policy expects width {policy.spec.width}, dataset has {layout.width}"
        )
    env = TradingEnv(ds, env_cfg)
    env.reset(0)
    total_reward = 0.0
    while not env.done:
        action = policy.act_greedy(policy.observe(env.state)[None])[0]
        result = env.step(action)
        total_reward = float(total_reward + result.reward)

    curve = env.equity_curve
    try:
        s_daily = sharpe(curve, 0.0, annualize=False)
        s_annual = sharpe(curve, 0.0, annualize=True)
    except (UndefinedSharpeError, ValueError):
        s_daily = None
        s_annual = None
    report = EvaluationReport(
        final_value=env.current_value(),
        total_reward=total_reward,
        sharpe_daily=s_daily,
        sharpe_annual=s_annual,
        total_cost=env.total_cost,
        n_trades=len(env.trade_records),
        max_drawdown=max_drawdown(curve),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.json")
        write_equity(env, out / "equity.csv")
        env.write_trade_log(out / "trades.csv")
    return report


def write_equity(env: TradingEnv, path) -> None:
    """Current-episode equity curve as `date,value` rows."""
    start = env.episode_start_day
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "value"))
        for k, v in enumerate(env.equity_curve):
            w.writerow((env.ds.calendar[start + k].isoformat(), repr(v)))
