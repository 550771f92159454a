"""Benchmark the conv/pool kernels: numba JIT vs the pure-numpy fallback.

Run with the default backend (numba when available); the script imports
the numpy implementations directly, so both paths are timed in one
process regardless of MATRIX_TRADER_NUMBA.

    python3 benchmarks/benchmark_kernels.py
"""

from timeit import default_timer as timer

import numpy as np

from matrix_trader.nets import kernels

# (label, batch, channels_in, H, W, filters)
SHAPES = [
    ("obs 90x511, conv1", 8, 1, 90, 511, 32),
    ("pooled 45x255, conv2", 8, 32, 45, 255, 64),
    ("miniature 12x17", 64, 1, 12, 17, 4),
]

REPEATS = 3


def _time(fn, *args) -> float:
    fn(*args)  # warm-up (also triggers JIT compilation)
    best = float("inf")
    for _ in range(REPEATS):
        t0 = timer()
        fn(*args)
        best = min(best, timer() - t0)
    return best


def bench_conv(n, c, h, w, f) -> dict[str, float]:
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, c, h, w)).astype(np.float32)
    wt = rng.standard_normal((f, c, 3, 3)).astype(np.float32)
    b = rng.standard_normal(f).astype(np.float32)
    out = kernels.conv2d_forward_numpy(x, wt, b)
    times = {
        "conv fwd numpy": _time(kernels.conv2d_forward_numpy, x, wt, b),
        "conv bwd numpy": _time(kernels.conv2d_backward_numpy, x, wt, out),
    }
    if kernels.USE_NUMBA:
        nb_out = kernels.conv2d_forward_numba(x, wt, b)
        assert np.allclose(nb_out, out, atol=1e-4)
        times["conv fwd numba"] = _time(kernels.conv2d_forward_numba, x, wt, b)
        times["conv bwd numba"] = _time(kernels.conv2d_backward_numba, x, wt, out)
    return times


def bench_pool(n, c, h, w) -> dict[str, float]:
    rng = np.random.default_rng(1)
    x = rng.standard_normal((n, c, h, w)).astype(np.float32)
    out, idx = kernels.maxpool2d_forward_numpy(x)
    times = {
        "pool fwd numpy": _time(kernels.maxpool2d_forward_numpy, x),
        "pool bwd numpy": _time(kernels.maxpool2d_backward_numpy, out, idx, x.shape),
    }
    if kernels.USE_NUMBA:
        nb_out, nb_idx = kernels.maxpool2d_forward_numba(x)
        assert np.array_equal(nb_out, out)
        times["pool fwd numba"] = _time(kernels.maxpool2d_forward_numba, x)
        times["pool bwd numba"] = _time(
            kernels.maxpool2d_backward_numba, out, idx, x.shape
        )
    return times


def main() -> None:
    print(f"active backend: {kernels.backend_name()}")
    if not kernels.USE_NUMBA:
        print("numba unavailable or disabled; timing numpy path only")
    for label, n, c, h, w, f in SHAPES:
        print(f"\n{label}  (batch={n}, {c}x{h}x{w} -> {f} filters)")
        rows = {}
        rows.update(bench_conv(n, c, h, w, f))
        rows.update(bench_pool(n, f, h, w))
        for name, sec in rows.items():
            print(f"  {name:<16} {sec * 1e3:9.2f} ms")
        if kernels.USE_NUMBA:
            for op in ("conv fwd", "conv bwd", "pool fwd", "pool bwd"):
                ratio = rows[f"{op} numpy"] / rows[f"{op} numba"]
                print(f"  {op}: numba is {ratio:.1f}x vs numpy")


if __name__ == "__main__":
    main()
