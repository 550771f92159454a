"""Advantage actor-critic: one gradient step per rollout."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from matrix_trader.algo.gae import compute_gae
from matrix_trader.algo.optim import zero_grads
from matrix_trader.algo.ppo import _entropy_value
from matrix_trader.nets import autodiff as ad
from matrix_trader.nets.policies import gaussian_entropy, gaussian_log_prob


@dataclass(frozen=True)
class A2cConfig:
    gamma: float = 0.99
    lam: float = 1.0
    horizon: int = 5
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    lr: float = 7e-4
    rms_alpha: float = 0.99
    rms_eps: float = 1e-5
    total_steps: int = 5

    kind = "a2c"

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if min(self.horizon, self.total_steps) < 1:
            raise ValueError("horizon and total_steps must be >= 1")
        if self.lr <= 0.0:
            raise ValueError(f"lr must be > 0, got {self.lr}")


def a2c_update(policy, optimizer, buffers, cfg: A2cConfig) -> dict:
    """Single full-batch update; advantages are used raw (no normalization)
    and detached from the critic path."""
    adv_parts, ret_parts = [], []
    for b in buffers:
        adv, ret = compute_gae(
            b.rewards, b.values, b.dones, b.bootstrap_value, cfg.gamma, cfg.lam
        )
        adv_parts.append(adv)
        ret_parts.append(ret)
    obs = np.concatenate([b.obs for b in buffers])
    actions = np.concatenate([b.actions for b in buffers])
    advantages = np.concatenate(adv_parts).astype(np.float32)
    returns = np.concatenate(ret_parts).astype(np.float32)

    out = policy.forward_graph(obs)
    log_probs = gaussian_log_prob(out.mean, out.log_std, actions)
    actor_loss = ad.neg(ad.tmean(ad.mul(log_probs, advantages)))
    v_err = ad.sub(out.value, returns)
    critic_loss = ad.tmean(ad.mul(v_err, v_err))
    loss = ad.add(actor_loss, ad.mul(critic_loss, cfg.value_coef))
    if cfg.entropy_coef != 0.0:
        loss = ad.sub(loss, ad.mul(gaussian_entropy(out.log_std), cfg.entropy_coef))

    loss_val = float(loss.data)
    stats = {
        "actor_loss": float(actor_loss.data),
        "critic_loss": float(critic_loss.data),
        "loss": loss_val,
        "entropy": _entropy_value(out.log_std.data),
        "aborted": False,
    }
    if not math.isfinite(loss_val):
        stats["aborted"] = True
        return stats
    tensors = policy.params.trainable()
    zero_grads(tensors)
    loss.backward()
    optimizer.step()
    return stats
