"""Proximal policy optimization with a clipped surrogate objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from matrix_trader.algo.gae import compute_gae
from matrix_trader.algo.optim import clip_grad_norm, zero_grads
from matrix_trader.nets import autodiff as ad
from matrix_trader.nets.autodiff import LOG_2PI
from matrix_trader.nets.policies import gaussian_entropy, gaussian_log_prob


@dataclass(frozen=True)
class PpoConfig:
    clip_ratio: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 10
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    lr: float = 3e-4
    horizon: int = 2048
    max_grad_norm: float = 0.5
    total_steps: int = 2048

    kind = "ppo"

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.clip_ratio <= 0.0:
            raise ValueError(f"clip_ratio must be > 0, got {self.clip_ratio}")
        if min(self.epochs, self.minibatch_size, self.horizon, self.total_steps) < 1:
            raise ValueError("epochs, minibatch_size, horizon, total_steps must be >= 1")
        if self.lr <= 0.0:
            raise ValueError(f"lr must be > 0, got {self.lr}")


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Standardize to mean 0, std 1 (population std); identity for n = 1."""
    if adv.size <= 1:
        return adv
    return (adv - adv.mean()) / (adv.std() + eps)


def _entropy_value(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * (1.0 + LOG_2PI)))


def ppo_update(policy, optimizer, buffers, cfg: PpoConfig,
               rng: np.random.Generator) -> dict:
    """One PPO update over collected rollouts; mutates the policy in place.

    Runs `epochs` passes of shuffled minibatches. Advantages are
    normalized per minibatch; each minibatch builds the clipped-surrogate
    + value loss graph, backpropagates, clips the global gradient norm,
    and steps the optimizer. A non-finite loss aborts the remaining
    minibatches and is flagged in the diagnostics.
    """
    adv_parts, ret_parts = [], []
    for b in buffers:
        adv, ret = compute_gae(
            b.rewards, b.values, b.dones, b.bootstrap_value, cfg.gamma, cfg.lam
        )
        adv_parts.append(adv)
        ret_parts.append(ret)
    obs = np.concatenate([b.obs for b in buffers])
    actions = np.concatenate([b.actions for b in buffers])
    old_log_probs = np.concatenate([b.log_probs for b in buffers])
    advantages = np.concatenate(adv_parts)
    returns = np.concatenate(ret_parts).astype(np.float32)

    n = len(obs)
    tensors = policy.params.trainable()
    stats = {"actor_loss": 0.0, "critic_loss": 0.0, "loss": 0.0,
             "entropy": 0.0, "grad_norm": 0.0, "n_minibatches": 0,
             "aborted": False}

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            mb = perm[start : start + cfg.minibatch_size]
            mb_adv = normalize_advantages(advantages[mb]).astype(np.float32)
            out = policy.forward_graph(obs[mb])
            log_probs = gaussian_log_prob(out.mean, out.log_std, actions[mb])
            ratio = ad.texp(ad.sub(log_probs, old_log_probs[mb]))
            surr_raw = ad.mul(ratio, mb_adv)
            surr_clip = ad.mul(
                ad.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio), mb_adv
            )
            actor_loss = ad.neg(ad.tmean(ad.minimum(surr_raw, surr_clip)))
            v_err = ad.sub(out.value, returns[mb])
            critic_loss = ad.tmean(ad.mul(v_err, v_err))
            loss = ad.add(actor_loss, ad.mul(critic_loss, cfg.value_coef))
            if cfg.entropy_coef != 0.0:
                loss = ad.sub(
                    loss, ad.mul(gaussian_entropy(out.log_std), cfg.entropy_coef)
                )
            loss_val = float(loss.data)
            if not math.isfinite(loss_val):
                stats["aborted"] = True
                return stats
            zero_grads(tensors)
            loss.backward()
            stats["grad_norm"] += clip_grad_norm(tensors, cfg.max_grad_norm)
            optimizer.step()
            stats["actor_loss"] += float(actor_loss.data)
            stats["critic_loss"] += float(critic_loss.data)
            stats["loss"] += loss_val
            stats["entropy"] += _entropy_value(out.log_std.data)
            stats["n_minibatches"] += 1

    k = max(stats["n_minibatches"], 1)
    for key in ("actor_loss", "critic_loss", "loss", "entropy", "grad_norm"):
        stats[key] /= k
    return stats
