"""Convolution and pooling kernels, the hot loops of the CNN policy.

Two interchangeable backends produce identical results:

* numba: explicit loops under @njit (default when numba imports cleanly)
* numpy: shifted-slice accumulation over kernel offsets, BLAS-backed

Set ``MATRIX_TRADER_NUMBA=0`` to force the numpy path or ``=1`` to require
numba (ImportError if unavailable). ``benchmarks/benchmark_kernels.py``
compares the two.

All kernels treat float32 and float64 alike and are single-threaded.
"""

from __future__ import annotations

import os

import numpy as np

_TRUE = ("1", "true", "on", "yes")
_FALSE = ("0", "false", "off", "no")


def _resolve_backend() -> bool:
    flag = os.environ.get("MATRIX_TRADER_NUMBA", "").strip().lower()
    if flag in _FALSE:
        return False
    if flag in _TRUE:
        import numba  # noqa: F401  # loud failure when explicitly requested

        return True
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


USE_NUMBA = _resolve_backend()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy --

def conv2d_forward_numpy(x, w, b, stride=1, pad=1):
    """x (N,C,H,W), w (F,C,KH,KW), b (F,) -> (N,F,OH,OW)."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    acc = np.zeros((n, oh, ow, f), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride]
            acc += np.tensordot(patch, w[:, :, u, v], axes=([1], [1]))
    return np.ascontiguousarray(acc.transpose(0, 3, 1, 2)) + b.reshape(1, f, 1, 1)


def conv2d_backward_numpy(x, w, dout, stride=1, pad=1):
    """Gradients (dx, dw, db) of conv2d_forward w.r.t. inputs."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    _, _, oh, ow = dout.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride]
            dw[:, :, u, v] = np.tensordot(dout, patch, axes=([0, 2, 3], [0, 2, 3]))
            spread = np.tensordot(dout, w[:, :, u, v], axes=([1], [0]))
            dxp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride] += (
                spread.transpose(0, 3, 1, 2)
            )
    db = dout.sum(axis=(0, 2, 3))
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return np.ascontiguousarray(dx), dw, db


def maxpool2d_forward_numpy(x, k=2, s=2):
    """Returns (out, idx) where idx holds the in-window flat argmax
    (row-major, first max wins) used by the backward pass."""
    n, c, h, wd = x.shape
    oh = (h - k) // s + 1
    ow = (wd - k) // s + 1
    stack = np.empty((k * k, n, c, oh, ow), dtype=x.dtype)
    for u in range(k):
        for v in range(k):
            stack[u * k + v] = x[:, :, u : u + s * oh : s, v : v + s * ow : s]
    idx = stack.argmax(axis=0)
    out = np.take_along_axis(stack, idx[None], axis=0)[0]
    return out, idx.astype(np.int64)


def maxpool2d_backward_numpy(dout, idx, x_shape, k=2, s=2):
    n, c, h, wd = x_shape
    _, _, oh, ow = dout.shape
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for u in range(k):
        for v in range(k):
            sel = idx == (u * k + v)
            dx[:, :, u : u + s * oh : s, v : v + s * ow : s] += np.where(sel, dout, 0)
    return dx


# ---------------------------------------------------------------- numba --

if USE_NUMBA:
    from numba import njit

    # Inner loops run along the contiguous output row so LLVM can
    # vectorize them; fastmath permits the reassociation that needs.
    @njit(cache=True, fastmath=True)
    def _conv2d_forward_nb(xp, w, b, stride, oh, ow):
        n = xp.shape[0]
        f, c, kh, kw = w.shape
        out = np.empty((n, f, oh, ow), dtype=xp.dtype)
        for ni in range(n):
            for fi in range(f):
                for i in range(oh):
                    row = out[ni, fi, i]
                    row[:] = b[fi]
                    for ci in range(c):
                        for u in range(kh):
                            xrow = xp[ni, ci, i * stride + u]
                            for v in range(kw):
                                wv = w[fi, ci, u, v]
                                if stride == 1:
                                    for j in range(ow):
                                        row[j] += wv * xrow[v + j]
                                else:
                                    for j in range(ow):
                                        row[j] += wv * xrow[v + j * stride]
        return out

    @njit(cache=True, fastmath=True)
    def _conv2d_backward_nb(xp, w, dout, stride):
        n = xp.shape[0]
        f, c, kh, kw = w.shape
        oh = dout.shape[2]
        ow = dout.shape[3]
        dxp = np.zeros(xp.shape, dtype=xp.dtype)
        dw = np.zeros(w.shape, dtype=w.dtype)
        db = np.zeros(f, dtype=w.dtype)
        for ni in range(n):
            for fi in range(f):
                for i in range(oh):
                    grow = dout[ni, fi, i]
                    s = grow[0] * 0
                    for j in range(ow):
                        s += grow[j]
                    db[fi] += s
                    for ci in range(c):
                        for u in range(kh):
                            xrow = xp[ni, ci, i * stride + u]
                            dxrow = dxp[ni, ci, i * stride + u]
                            for v in range(kw):
                                wv = w[fi, ci, u, v]
                                acc = wv * 0
                                if stride == 1:
                                    for j in range(ow):
                                        g = grow[j]
                                        dxrow[v + j] += wv * g
                                        acc += xrow[v + j] * g
                                else:
                                    for j in range(ow):
                                        g = grow[j]
                                        dxrow[v + j * stride] += wv * g
                                        acc += xrow[v + j * stride] * g
                                dw[fi, ci, u, v] += acc
        return dxp, dw, db

    @njit(cache=True)
    def _maxpool2d_forward_nb(x, k, s, oh, ow):
        n, c, _, _ = x.shape
        out = np.empty((n, c, oh, ow), dtype=x.dtype)
        idx = np.empty((n, c, oh, ow), dtype=np.int64)
        for ni in range(n):
            for ci in range(c):
                for i in range(oh):
                    for j in range(ow):
                        best = x[ni, ci, i * s, j * s]
                        bi = 0
                        for u in range(k):
                            for v in range(k):
                                val = x[ni, ci, i * s + u, j * s + v]
                                if val > best:
                                    best = val
                                    bi = u * k + v
                        out[ni, ci, i, j] = best
                        idx[ni, ci, i, j] = bi
        return out, idx

    @njit(cache=True)
    def _maxpool2d_backward_nb(dout, idx, dx, k, s):
        n, c, oh, ow = dout.shape
        for ni in range(n):
            for ci in range(c):
                for i in range(oh):
                    for j in range(ow):
                        bi = idx[ni, ci, i, j]
                        u = bi // k
                        v = bi % k
                        dx[ni, ci, i * s + u, j * s + v] += dout[ni, ci, i, j]
        return dx

    def conv2d_forward_numba(x, w, b, stride=1, pad=1):
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        oh = (x.shape[2] + 2 * pad - w.shape[2]) // stride + 1
        ow = (x.shape[3] + 2 * pad - w.shape[3]) // stride + 1
        return _conv2d_forward_nb(
            np.ascontiguousarray(xp), np.ascontiguousarray(w), b, stride, oh, ow
        )

    def conv2d_backward_numba(x, w, dout, stride=1, pad=1):
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        dxp, dw, db = _conv2d_backward_nb(
            np.ascontiguousarray(xp),
            np.ascontiguousarray(w),
            np.ascontiguousarray(dout),
            stride,
        )
        h, wd = x.shape[2], x.shape[3]
        dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
        return np.ascontiguousarray(dx), dw, db

    def maxpool2d_forward_numba(x, k=2, s=2):
        oh = (x.shape[2] - k) // s + 1
        ow = (x.shape[3] - k) // s + 1
        return _maxpool2d_forward_nb(np.ascontiguousarray(x), k, s, oh, ow)

    def maxpool2d_backward_numba(dout, idx, x_shape, k=2, s=2):
        dx = np.zeros(x_shape, dtype=dout.dtype)
        return _maxpool2d_backward_nb(np.ascontiguousarray(dout), idx, dx, k, s)


# ------------------------------------------------------------- dispatch --

if USE_NUMBA:
    conv2d_forward = conv2d_forward_numba
    conv2d_backward = conv2d_backward_numba
    maxpool2d_forward = maxpool2d_forward_numba
    maxpool2d_backward = maxpool2d_backward_numba
else:
    conv2d_forward = conv2d_forward_numpy
    conv2d_backward = conv2d_backward_numpy
    maxpool2d_forward = maxpool2d_forward_numpy
    maxpool2d_backward = maxpool2d_backward_numpy
