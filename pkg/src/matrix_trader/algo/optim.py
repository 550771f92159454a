"""First-order optimizers over autodiff tensors.

Both update rules follow the conventional formulations: adaptive moment
estimation with bias correction and epsilon outside the square root, and
root-mean-square propagation without momentum. Parameters whose gradient
is unset are skipped.
"""

from __future__ import annotations

import numpy as np

from matrix_trader.nets.autodiff import Tensor


def zero_grads(tensors: list[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def clip_grad_norm(tensors: list[Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm. No-op (aside from the norm) when already
    within bounds.
    """
    sq = 0.0
    grads = [t.grad for t in tensors if t.grad is not None]
    for g in grads:
        sq += float(np.sum(np.square(g, dtype=np.float64)))
    total = float(np.sqrt(sq))
    coef = max_norm / (total + 1e-6)
    if coef < 1.0:
        for g in grads:
            g *= coef
    return total


class Adam:
    def __init__(self, tensors: list[Tensor], lr: float = 3e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.tensors = list(tensors)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(t.data) for t in self.tensors]
        self._v = [np.zeros_like(t.data) for t in self.tensors]

    def step(self) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for i, t in enumerate(self.tensors):
            g = t.grad
            if g is None:
                continue
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / b1c
            v_hat = self._v[i] / b2c
            t.data = t.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        zero_grads(self.tensors)


class RmsProp:
    def __init__(self, tensors: list[Tensor], lr: float = 7e-4,
                 alpha: float = 0.99, eps: float = 1e-5):
        self.tensors = list(tensors)
        self.lr = lr
        self.alpha = alpha
        self.eps = eps
        self._sq = [np.zeros_like(t.data) for t in self.tensors]

    def step(self) -> None:
        for i, t in enumerate(self.tensors):
            g = t.grad
            if g is None:
                continue
            self._sq[i] = self.alpha * self._sq[i] + (1.0 - self.alpha) * (g * g)
            t.data = t.data - self.lr * g / (np.sqrt(self._sq[i]) + self.eps)

    def zero_grad(self) -> None:
        zero_grads(self.tensors)
