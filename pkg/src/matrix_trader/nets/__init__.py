"""Function approximators: CNN and MLP Gaussian policies over a small
reverse-mode differentiation core, with save/load of parameter archives."""

from matrix_trader.nets.autodiff import Tensor, no_grad
from matrix_trader.nets.inits import Parameters, orthogonal
from matrix_trader.nets.policies import (
    CnnSpec,
    GaussianPolicyOutput,
    MlpSpec,
    count_learnable,
    gaussian_entropy,
    gaussian_log_prob,
    init_params,
    policy_forward,
    sample_action,
)
from matrix_trader.nets.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor",
    "no_grad",
    "Parameters",
    "orthogonal",
    "CnnSpec",
    "MlpSpec",
    "GaussianPolicyOutput",
    "init_params",
    "policy_forward",
    "sample_action",
    "gaussian_log_prob",
    "gaussian_entropy",
    "count_learnable",
    "save_checkpoint",
    "load_checkpoint",
]
