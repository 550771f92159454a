"""Fixed-horizon rollout storage and collection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from matrix_trader.env import TradingEnv


@dataclass
class RolloutBuffer:
    """One rollout: n steps of (state, action, log-prob, value, reward,
    done) plus the bootstrap value of the state after the final step
    (zero when that step ended the episode)."""

    obs: np.ndarray        # (n, ...) float32 network inputs
    actions: np.ndarray    # (n, A) raw pre-clamp samples
    log_probs: np.ndarray  # (n,)
    values: np.ndarray     # (n,)
    rewards: np.ndarray    # (n,) scaled
    dones: np.ndarray      # (n,) 1.0 where the episode ended at this step
    bootstrap_value: float
    infos: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.obs)
        for name in ("actions", "log_probs", "values", "rewards", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length != horizon {n}")
        if not np.all(np.isfinite(self.log_probs)):
            raise ValueError("non-finite log-probs in rollout")

    def __len__(self) -> int:
        return len(self.obs)


def collect_rollout(env: TradingEnv, policy, horizon: int,
                    rng: np.random.Generator, reset_start: int = 0) -> RolloutBuffer:
    """Run `horizon` steps with sampled actions, auto-resetting on done.

    The env must have been reset already; done flags mark episode
    boundaries inside the buffer (D23).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    obs_list, actions, log_probs, values, rewards, dones, infos = (
        [], [], [], [], [], [], []
    )
    for _ in range(horizon):
        obs = policy.observe(env.state)
        action, log_prob, value = policy.act(obs[None], rng)
        result = env.step(action[0])
        obs_list.append(obs)
        actions.append(action[0])
        log_probs.append(log_prob[0])
        values.append(value[0])
        rewards.append(result.reward)
        dones.append(1.0 if result.done else 0.0)
        infos.append(result.info)
        if result.done:
            env.reset(reset_start)
    if dones[-1]:
        bootstrap = 0.0
    else:
        bootstrap = float(policy.values(policy.observe(env.state)[None])[0])
    return RolloutBuffer(
        obs=np.asarray(obs_list, dtype=np.float32),
        actions=np.asarray(actions, dtype=np.float32),
        log_probs=np.asarray(log_probs, dtype=np.float32),
        values=np.asarray(values, dtype=np.float32),
        rewards=np.asarray(rewards, dtype=np.float32),
        dones=np.asarray(dones, dtype=np.float32),
        bootstrap_value=bootstrap,
        infos=infos,
    )
