"""Reverse-mode automatic differentiation on numpy arrays.

A `Tensor` wraps an ndarray and remembers how it was produced; calling
`backward()` on a scalar result walks the graph in reverse topological
order and accumulates gradients into every tensor that requires them.
The op set is exactly what the policies and losses need: elementwise
arithmetic, matmul, reductions, tanh/relu/exp/log, clip and minimum,
plus dedicated convolution, max-pool, and 2D batch-norm nodes.

Works identically at float32 (training) and float64 (verification);
dtype follows the operands. Python scalars do not promote the dtype.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from matrix_trader.nets import kernels

_GRAD_ENABLED = [True]


@contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def grad_enabled() -> bool:
    return _GRAD_ENABLED[-1]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- bookkeeping -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _value(x):
    return x.data if isinstance(x, Tensor) else x


def _needs_graph(*xs) -> bool:
    return grad_enabled() and any(
        isinstance(x, Tensor) and x.requires_grad for x in xs
    )


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    g = _unbroadcast(np.asarray(g), t.data.shape)
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    out.requires_grad = True
    out._parents = tuple(p for p in parents if isinstance(p, Tensor))
    out._backward = backward
    return out


# -- elementwise arithmetic ------------------------------------------------


def add(a, b) -> Tensor:
    out_data = _value(a) + _value(b)
    if not _needs_graph(a, b):
        return Tensor(out_data)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            _accumulate(a, g)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, g)

    return _node(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    out_data = _value(a) - _value(b)
    if not _needs_graph(a, b):
        return Tensor(out_data)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            _accumulate(a, g)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, -g)

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out_data = av * bv
    if not _needs_graph(a, b):
        return Tensor(out_data)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            _accumulate(a, g * bv)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, g * av)

    return _node(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out_data = av / bv
    if not _needs_graph(a, b):
        return Tensor(out_data)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            _accumulate(a, g / bv)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, -g * av / (bv * bv))

    return _node(out_data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    out_data = -a.data
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, -g)

    return _node(out_data, (a,), backward)


def power(a: Tensor, p) -> Tensor:
    if isinstance(p, Tensor):
        raise TypeError("only scalar exponents are supported")
    out_data = a.data**p
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, g * p * a.data ** (p - 1))

    return _node(out_data, (a,), backward)


def texp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, g * out_data)

    return _node(out_data, (a,), backward)


def tlog(a: Tensor) -> Tensor:
    out_data = np.log(a.data)
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, g / a.data)

    return _node(out_data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, g * (1.0 - out_data * out_data))

    return _node(out_data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)
    if not _needs_graph(a):
        return Tensor(out_data)

    mask = a.data > 0

    def backward(g):
        _accumulate(a, g * mask)

    return _node(out_data, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes inside the bounds, inclusive."""
    out_data = np.clip(a.data, lo, hi)
    if not _needs_graph(a):
        return Tensor(out_data)

    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        _accumulate(a, g * mask)

    return _node(out_data, (a,), backward)


def minimum(a, b) -> Tensor:
    """Elementwise min; exact ties send half the gradient to each side."""
    av, bv = _value(a), _value(b)
    out_data = np.minimum(av, bv)
    if not _needs_graph(a, b):
        return Tensor(out_data)

    tie = (av == bv)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            wa = (av < bv) + 0.5 * tie
            _accumulate(a, g * wa.astype(g.dtype))
        if isinstance(b, Tensor) and b.requires_grad:
            wb = (bv < av) + 0.5 * tie
            _accumulate(b, g * wb.astype(g.dtype))

    return _node(out_data, (a, b), backward)


# -- linear algebra and reductions ----------------------------------------


def matmul(a: Tensor, b) -> Tensor:
    av, bv = _value(a), _value(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul supports 2-D operands, got {av.ndim}-D @ {bv.ndim}-D")
    out_data = av @ bv
    if not _needs_graph(a, b):
        return Tensor(out_data)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            _accumulate(a, g @ bv.T)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, av.T @ g)

    return _node(out_data, (a, b), backward)


def _expand_reduced(g, axis, keepdims, shape):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, _expand_reduced(g, axis, keepdims, a.data.shape))

    return _node(out_data, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    if not _needs_graph(a):
        return Tensor(out_data)

    count = a.data.size if axis is None else a.data.size // out_data.size

    def backward(g):
        _accumulate(a, _expand_reduced(g, axis, keepdims, a.data.shape) / count)

    return _node(out_data, (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)
    if not _needs_graph(a):
        return Tensor(out_data)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _node(out_data, (a,), backward)


# -- network-layer nodes ---------------------------------------------------


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 1) -> Tensor:
    xv, wv, bv = _value(x), _value(w), _value(b)
    out_data = kernels.conv2d_forward(xv, wv, bv, stride, pad)
    if not _needs_graph(x, w, b):
        return Tensor(out_data)

    def backward(g):
        dx, dw, db = kernels.conv2d_backward(xv, wv, np.ascontiguousarray(g), stride, pad)
        if isinstance(x, Tensor) and x.requires_grad:
            _accumulate(x, dx)
        if isinstance(w, Tensor) and w.requires_grad:
            _accumulate(w, dw)
        if isinstance(b, Tensor) and b.requires_grad:
            _accumulate(b, db)

    return _node(out_data, (x, w, b), backward)


def maxpool2d(x: Tensor, k: int = 2, s: int = 2) -> Tensor:
    out_data, idx = kernels.maxpool2d_forward(_value(x), k, s)
    if not _needs_graph(x):
        return Tensor(out_data)

    x_shape = _value(x).shape

    def backward(g):
        _accumulate(
            x, kernels.maxpool2d_backward(np.ascontiguousarray(g), idx, x_shape, k, s)
        )

    return _node(out_data, (x,), backward)


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of an N×C×H×W batch.

    Train mode normalizes with batch statistics over (N, H, W) and updates
    the running buffers in place (momentum 0.1, unbiased variance). Eval
    mode normalizes with the running buffers, which therefore stay fixed.
    """
    xv = _value(x)
    if xv.ndim != 4:
        raise ValueError(f"batchnorm2d expects N,C,H,W input, got shape {xv.shape}")
    gv, bv = _value(gamma), _value(beta)
    col = (1, -1, 1, 1)

    if training:
        n = xv.shape[0]
        if n < 2:
            raise ValueError("train-mode batch norm needs a batch of at least 2")
        m = n * xv.shape[2] * xv.shape[3]
        batch_mean = xv.mean(axis=(0, 2, 3))
        batch_var = xv.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(batch_var + eps)
        xhat = (xv - batch_mean.reshape(col)) * inv_std.reshape(col)
        running_mean[:] = (1.0 - momentum) * running_mean + momentum * batch_mean
        running_var[:] = (
            (1.0 - momentum) * running_var + momentum * batch_var * (m / (m - 1))
        )
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (xv - running_mean.reshape(col)) * inv_std.reshape(col)

    out_data = gv.reshape(col) * xhat + bv.reshape(col)
    if not _needs_graph(x, gamma, beta):
        return Tensor(out_data)

    def backward(g):
        if isinstance(gamma, Tensor) and gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if isinstance(beta, Tensor) and beta.requires_grad:
            _accumulate(beta, g.sum(axis=(0, 2, 3)))
        if isinstance(x, Tensor) and x.requires_grad:
            if training:
                m_f = xv.shape[0] * xv.shape[2] * xv.shape[3]
                dxhat = g * gv.reshape(col)
                s1 = dxhat.sum(axis=(0, 2, 3)).reshape(col)
                s2 = (dxhat * xhat).sum(axis=(0, 2, 3)).reshape(col)
                dx = (inv_std.reshape(col) / m_f) * (m_f * dxhat - s1 - xhat * s2)
            else:
                dx = g * (gv * inv_std).reshape(col)
            _accumulate(x, dx)

    return _node(out_data, (x, gamma, beta), backward)


def gradients(loss: Tensor, params) -> list[np.ndarray]:
    """Backward pass returning gradient arrays aligned with `params`
    (zeros for parameters the loss does not touch)."""
    for p in params:
        p.grad = None
    loss.backward()
    return [
        p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
    ]


LOG_2PI = math.log(2.0 * math.pi)
