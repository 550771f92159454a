"""Trainers: rollout collection, advantage estimation, PPO and A2C
updates, and the train/evaluate drivers."""

from matrix_trader.algo.a2c import A2cConfig, a2c_update
from matrix_trader.algo.buffer import RolloutBuffer, collect_rollout
from matrix_trader.algo.driver import (
    HISTORY_HEADER,
    HistoryRow,
    TrainResult,
    evaluate,
    load_history,
    train,
    write_history,
)
from matrix_trader.algo.gae import compute_gae
from matrix_trader.algo.optim import Adam, RmsProp, clip_grad_norm
from matrix_trader.algo.policy import Policy, make_policy
from matrix_trader.algo.ppo import PpoConfig, ppo_update

__all__ = [
    "A2cConfig",
    "Adam",
    "HISTORY_HEADER",
    "HistoryRow",
    "Policy",
    "PpoConfig",
    "RmsProp",
    "RolloutBuffer",
    "TrainResult",
    "a2c_update",
    "clip_grad_norm",
    "collect_rollout",
    "compute_gae",
    "evaluate",
    "load_history",
    "make_policy",
    "ppo_update",
    "train",
    "write_history",
]
