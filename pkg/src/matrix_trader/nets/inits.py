"""Parameter containers and initializers."""

from __future__ import annotations

import numpy as np

from matrix_trader.nets.autodiff import Tensor


def orthogonal(shape: tuple[int, ...], gain: float, rng: np.random.Generator,
               dtype=np.float32) -> np.ndarray:
    """Orthogonal matrix init (QR of a Gaussian draw), scaled by gain.

    Tensors of rank > 2 are treated as (shape[0], prod(rest)). The smaller
    of the two flat dimensions indexes an orthonormal set, so WᵀW (or WWᵀ)
    equals gain²·I on that side.
    """
    if len(shape) < 2:
        raise ValueError(f"orthogonal init needs rank >= 2, got shape {shape}")
    rows = shape[0]
    cols = int(np.prod(shape[1:]))
    flat = rng.standard_normal((rows, cols))
    if rows < cols:
        flat = flat.T
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
    if rows < cols:
        q = q.T
    return (gain * q).reshape(shape).astype(dtype)


class Parameters:
    """Ordered, named arrays of a policy network.

    Learnable entries are `Tensor`s (weights, biases, batch-norm scale and
    shift); buffers are plain ndarrays (batch-norm running statistics),
    mutated in place and excluded from gradient updates. Insertion order is
    the serialization order.
    """

    def __init__(self) -> None:
        self._order: list[str] = []
        self._tensors: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}

    def add_param(self, name: str, array: np.ndarray) -> Tensor:
        self._check_new(name)
        t = Tensor(np.asarray(array), requires_grad=True)
        self._tensors[name] = t
        self._order.append(name)
        return t

    def add_buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        self._check_new(name)
        arr = np.asarray(array)
        self._buffers[name] = arr
        self._order.append(name)
        return arr

    def _check_new(self, name: str) -> None:
        if name in self._tensors or name in self._buffers:
            raise ValueError(f"duplicate parameter name {name!r}")

    # -- access ------------------------------------------------------------

    def names(self) -> list[str]:
        return list(self._order)

    def tensor(self, name: str) -> Tensor:
        return self._tensors[name]

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def is_trainable(self, name: str) -> bool:
        return name in self._tensors

    def trainable(self) -> list[Tensor]:
        return [self._tensors[n] for n in self._order if n in self._tensors]

    def items(self):
        """Yield (name, ndarray) for every entry in insertion order."""
        for n in self._order:
            yield n, (self._tensors[n].data if n in self._tensors else self._buffers[n])

    def array(self, name: str) -> np.ndarray:
        if name in self._tensors:
            return self._tensors[name].data
        return self._buffers[name]

    def set_array(self, name: str, array: np.ndarray) -> None:
        """Overwrite an entry's values; the shape must match."""
        current = self.array(name)
        array = np.asarray(array)
        if array.shape != current.shape:
            raise ValueError(
                f"shape mismatch for {name!r}: have {current.shape}, got {array.shape}"
            )
        if name in self._tensors:
            self._tensors[name].data = array.astype(current.dtype)
        else:
            self._buffers[name][:] = array.astype(current.dtype)

    def n_learnable(self) -> int:
        return sum(t.data.size for t in self.trainable())

    def copy(self) -> "Parameters":
        out = Parameters()
        for n in self._order:
            if n in self._tensors:
                out.add_param(n, self._tensors[n].data.copy())
            else:
                out.add_buffer(n, self._buffers[n].copy())
        return out

    def astype(self, dtype) -> "Parameters":
        out = Parameters()
        for n in self._order:
            if n in self._tensors:
                out.add_param(n, self._tensors[n].data.astype(dtype))
            else:
                out.add_buffer(n, self._buffers[n].astype(dtype))
        return out
