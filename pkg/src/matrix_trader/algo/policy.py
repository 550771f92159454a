"""A policy bundle: architecture spec, parameters, and the observation
normalization used at the network boundary (accounting stays raw)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from matrix_trader.features import WindowStats, normalize_window
from matrix_trader.nets.autodiff import no_grad
from matrix_trader.nets.inits import Parameters
from matrix_trader.nets.policies import (
    CnnSpec,
    GaussianPolicyOutput,
    MlpSpec,
    init_params,
    policy_forward,
    sample_action,
)


@dataclass
class Policy:
    spec: CnnSpec | MlpSpec
    params: Parameters
    stats: WindowStats | None = None

    def observe(self, window: np.ndarray) -> np.ndarray:
        """Map a raw window matrix to the float32 network input."""
        if self.stats is not None:
            window = normalize_window(window, self.stats)
        return np.asarray(window, dtype=np.float32)

    def forward_graph(self, obs: np.ndarray, training_bn: bool = False
                      ) -> GaussianPolicyOutput:
        return policy_forward(self.spec, self.params, obs, training_bn=training_bn)

    def act(self, obs: np.ndarray, rng: np.random.Generator
            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sample actions for a batch; returns (actions, log_probs, values)."""
        with no_grad():
            out = self.forward_graph(obs)
            actions, log_probs = sample_action(out, rng)
            return actions, log_probs, out.value.data.copy()

    def act_greedy(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic action: the tanh-squashed mean."""
        with no_grad():
            return self.forward_graph(obs).mean.data.copy()

    def values(self, obs: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward_graph(obs).value.data.copy()

    def refresh_bn(self, obs: np.ndarray, chunk: int = 64) -> None:
        """Update batch-norm running statistics from collected states.

        Runs train-mode forwards over fixed-order chunks; a trailing chunk
        of one sample is skipped (train mode needs two). No-op for specs
        without batch norm.
        """
        if self.spec.kind != "cnn":
            return
        with no_grad():
            for start in range(0, len(obs), chunk):
                batch = obs[start : start + chunk]
                if len(batch) < 2:
                    continue
                self.forward_graph(batch, training_bn=True)


def make_policy(spec, seed: int, stats: WindowStats | None = None) -> Policy:
    return Policy(spec=spec, params=init_params(spec, seed), stats=stats)
