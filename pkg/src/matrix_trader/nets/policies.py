"""CNN and MLP Gaussian actor-critic policies.

Both share one trunk with two heads (D19): an actor producing a
tanh-squashed mean vector plus a learnable state-independent log-sigma,
and a linear critic producing the value estimate. The CNN consumes the
full window matrix as a one-channel image; the MLP consumes only the
newest daily vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from matrix_trader.nets import autodiff as ad
from matrix_trader.nets.autodiff import LOG_2PI, Tensor
from matrix_trader.nets.inits import Parameters, orthogonal

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


@dataclass(frozen=True)
class CnnSpec:
    """Two conv blocks (conv -> batch norm -> ReLU -> max-pool), then a
    dense ReLU layer feeding the heads. Stride 1, padding kernel//2."""

    window: int = 90
    width: int = 511
    n_actions: int = 30
    channels: tuple[int, int] = (32, 64)
    dense: int = 512
    kernel: int = 3
    pool: int = 2

    kind = "cnn"

    def __post_init__(self) -> None:
        if len(self.channels) != 2:
            raise ValueError("exactly two convolutional layers are supported")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")
        if min(self.window, self.width, self.n_actions, self.dense, self.pool,
               *self.channels) < 1:
            raise ValueError("all dimensions must be positive")

    @property
    def pad(self) -> int:
        return self.kernel // 2

    def conv_out_hw(self) -> tuple[int, int]:
        """Spatial size after both conv+pool blocks (conv preserves size)."""
        h, w = self.window, self.width
        for _ in range(2):
            h = (h - self.pool) // self.pool + 1
            w = (w - self.pool) // self.pool + 1
            if h < 1 or w < 1:
                raise ValueError(f"input {self.window}x{self.width} too small to pool twice")
        return h, w

    def flat_dim(self) -> int:
        h, w = self.conv_out_hw()
        return self.channels[1] * h * w


@dataclass(frozen=True)
class MlpSpec:
    """Two tanh hidden layers over the newest daily vector only."""

    width: int = 511
    n_actions: int = 30
    hidden: tuple[int, int] = (64, 64)

    kind = "mlp"

    def __post_init__(self) -> None:
        if len(self.hidden) != 2:
            raise ValueError("exactly two hidden layers are supported")
        if min(self.width, self.n_actions, *self.hidden) < 1:
            raise ValueError("all dimensions must be positive")


@dataclass(frozen=True)
class GaussianPolicyOutput:
    mean: Tensor      # (N, A), tanh-bounded
    log_std: Tensor   # (A,), clamped to [LOG_STD_MIN, LOG_STD_MAX]
    value: Tensor     # (N,)


GAIN_HIDDEN = math.sqrt(2.0)
GAIN_ACTOR = 0.01
GAIN_CRITIC = 1.0


def _layer_plan(spec) -> list[tuple[str, tuple[int, ...], str]]:
    """(name, shape, init) triples in serialization order. init is one of
    orth_hidden / orth_actor / orth_critic / zeros / ones / buffer_zeros /
    buffer_ones."""
    a = spec.n_actions
    plan: list[tuple[str, tuple[int, ...], str]] = []
    if spec.kind == "cnn":
        c1, c2 = spec.channels
        k = spec.kernel
        plan += [
            ("conv1.weight", (c1, 1, k, k), "orth_hidden"),
            ("conv1.bias", (c1,), "zeros"),
            ("bn1.gamma", (c1,), "ones"),
            ("bn1.beta", (c1,), "zeros"),
            ("bn1.running_mean", (c1,), "buffer_zeros"),
            ("bn1.running_var", (c1,), "buffer_ones"),
            ("conv2.weight", (c2, c1, k, k), "orth_hidden"),
            ("conv2.bias", (c2,), "zeros"),
            ("bn2.gamma", (c2,), "ones"),
            ("bn2.beta", (c2,), "zeros"),
            ("bn2.running_mean", (c2,), "buffer_zeros"),
            ("bn2.running_var", (c2,), "buffer_ones"),
            ("dense.weight", (spec.flat_dim(), spec.dense), "orth_hidden"),
            ("dense.bias", (spec.dense,), "zeros"),
        ]
        head_in = spec.dense
    else:
        h1, h2 = spec.hidden
        plan += [
            ("fc1.weight", (spec.width, h1), "orth_hidden"),
            ("fc1.bias", (h1,), "zeros"),
            ("fc2.weight", (h1, h2), "orth_hidden"),
            ("fc2.bias", (h2,), "zeros"),
        ]
        head_in = h2
    plan += [
        ("actor.weight", (head_in, a), "orth_actor"),
        ("actor.bias", (a,), "zeros"),
        ("critic.weight", (head_in, 1), "orth_critic"),
        ("critic.bias", (1,), "zeros"),
        ("log_std", (a,), "zeros"),
    ]
    return plan


_GAINS = {"orth_hidden": GAIN_HIDDEN, "orth_actor": GAIN_ACTOR, "orth_critic": GAIN_CRITIC}


def init_params(spec, seed: int, dtype=np.float32) -> Parameters:
    """Deterministic parameter initialization for a policy spec."""
    rng = np.random.default_rng(seed)
    params = Parameters()
    for name, shape, init in _layer_plan(spec):
        if init in _GAINS:
            params.add_param(name, orthogonal(shape, _GAINS[init], rng, dtype))
        elif init == "zeros":
            params.add_param(name, np.zeros(shape, dtype=dtype))
        elif init == "ones":
            params.add_param(name, np.ones(shape, dtype=dtype))
        elif init == "buffer_zeros":
            params.add_buffer(name, np.zeros(shape, dtype=dtype))
        elif init == "buffer_ones":
            params.add_buffer(name, np.ones(shape, dtype=dtype))
        else:  # pragma: no cover - plan is exhaustive
            raise AssertionError(init)
    return params


def empty_params(spec, dtype=np.float32) -> Parameters:
    """Zero-filled parameters with the spec's structure (for loading)."""
    params = Parameters()
    for name, shape, init in _layer_plan(spec):
        arr = np.zeros(shape, dtype=dtype)
        if init.startswith("buffer"):
            params.add_buffer(name, arr)
        else:
            params.add_param(name, arr)
    return params


def learnable_count(spec) -> int:
    """Learnable parameter count, computed from shapes alone."""
    return sum(
        int(np.prod(shape))
        for _, shape, init in _layer_plan(spec)
        if not init.startswith("buffer")
    )


def count_learnable(params: Parameters) -> int:
    return params.n_learnable()


def _as_batch(spec, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs)
    if spec.kind == "cnn":
        if obs.ndim == 3:
            obs = obs[:, None, :, :]
        if obs.ndim != 4 or obs.shape[1:] != (1, spec.window, spec.width):
            raise ValueError(
                f"expected (N, {spec.window}, {spec.width}) windows, got {obs.shape}"
            )
        return obs
    if obs.ndim == 3:
        obs = obs[:, -1, :]  # newest daily vector of each window
    if obs.ndim != 2 or obs.shape[1] != spec.width:
        raise ValueError(f"expected (N, {spec.width}) vectors, got {obs.shape}")
    return obs


def policy_forward(spec, params: Parameters, obs: np.ndarray,
                   training_bn: bool = False) -> GaussianPolicyOutput:
    """Build the forward graph over a batch of observations.

    Batch norm runs in eval mode (frozen running statistics) unless
    `training_bn` is set, so the same parameters give the same per-sample
    output regardless of batch composition.
    """
    x = _as_batch(spec, obs)
    n = x.shape[0]
    p = params.tensor
    if spec.kind == "cnn":
        h = ad.conv2d(Tensor(x), p("conv1.weight"), p("conv1.bias"), 1, spec.pad)
        h = ad.batchnorm2d(
            h, p("bn1.gamma"), p("bn1.beta"),
            params.buffer("bn1.running_mean"), params.buffer("bn1.running_var"),
            training=training_bn,
        )
        h = ad.maxpool2d(ad.relu(h), spec.pool, spec.pool)
        h = ad.conv2d(h, p("conv2.weight"), p("conv2.bias"), 1, spec.pad)
        h = ad.batchnorm2d(
            h, p("bn2.gamma"), p("bn2.beta"),
            params.buffer("bn2.running_mean"), params.buffer("bn2.running_var"),
            training=training_bn,
        )
        h = ad.maxpool2d(ad.relu(h), spec.pool, spec.pool)
        h = ad.reshape(h, (n, spec.flat_dim()))
        h = ad.relu(ad.add(ad.matmul(h, p("dense.weight")), p("dense.bias")))
    else:
        h = ad.tanh(ad.add(ad.matmul(Tensor(x), p("fc1.weight")), p("fc1.bias")))
        h = ad.tanh(ad.add(ad.matmul(h, p("fc2.weight")), p("fc2.bias")))
    mu = ad.tanh(ad.add(ad.matmul(h, p("actor.weight")), p("actor.bias")))
    value = ad.reshape(
        ad.add(ad.matmul(h, p("critic.weight")), p("critic.bias")), (n,)
    )
    log_std = ad.clip(p("log_std"), LOG_STD_MIN, LOG_STD_MAX)
    return GaussianPolicyOutput(mean=mu, log_std=log_std, value=value)


def gaussian_log_prob(mean: Tensor, log_std: Tensor, actions: np.ndarray) -> Tensor:
    """Diagonal-Gaussian log density of `actions`, differentiable in
    mean and log_std. Mirrors `gaussian_log_prob_np` op for op."""
    d = mean.shape[-1]
    z = ad.mul(ad.sub(actions, mean), ad.texp(ad.neg(log_std)))
    quad = ad.tsum(ad.mul(z, z), axis=-1)
    out = ad.sub(ad.mul(quad, -0.5), ad.tsum(log_std))
    return ad.sub(out, 0.5 * d * LOG_2PI)


def gaussian_log_prob_np(mean: np.ndarray, log_std: np.ndarray,
                         actions: np.ndarray) -> np.ndarray:
    d = mean.shape[-1]
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * (z * z).sum(axis=-1) - log_std.sum() - 0.5 * d * LOG_2PI


def gaussian_entropy(log_std: Tensor) -> Tensor:
    """Entropy of the diagonal Gaussian (summed over action dims); the
    state-independent sigma makes it the same for every sample."""
    return ad.tsum(ad.add(log_std, 0.5 * (1.0 + LOG_2PI)))


def sample_action(out: GaussianPolicyOutput, rng: np.random.Generator
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Draw actions from the policy Gaussian.

    Returns (actions (N, A), log_probs (N,)); the log density is taken at
    the raw sample, before the environment clamps to [-1, 1] on entry.
    """
    mean = out.mean.data
    log_std = out.log_std.data
    noise = rng.standard_normal(mean.shape)
    actions = (mean + np.exp(log_std) * noise).astype(mean.dtype)
    return actions, gaussian_log_prob_np(mean, log_std, actions)
