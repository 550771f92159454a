"""Daily feature vectors and the sliding-window matrix state.

Layout of one daily vector for D tickers (D2 lexicographic order):

    index 0                  cash balance
    indices 1 .. D           close prices
    indices D+1 .. 2D        shares held
    indices 2D+1 .. 2D+15D   ratios, 15 consecutive per ticker

With the default D = 30 universe this is the fixed 511-wide vector; the
window stacks the last 90 of them, row 0 oldest, row 89 newest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from matrix_trader.data.align import MarketDataset
from matrix_trader.data.ratios import N_RATIOS

WINDOW = 90

NORM_EPS = 1e-8


@dataclass(frozen=True)
class FeatureLayout:
    """Index map of a daily feature vector for a fixed ticker count."""

    n_assets: int

    @property
    def width(self) -> int:
        return 1 + 2 * self.n_assets + N_RATIOS * self.n_assets

    @property
    def price_slice(self) -> slice:
        return slice(1, 1 + self.n_assets)

    @property
    def holding_slice(self) -> slice:
        return slice(1 + self.n_assets, 1 + 2 * self.n_assets)

    @property
    def ratio_base(self) -> int:
        return 1 + 2 * self.n_assets

    def ratio_index(self, ticker: int, ratio: int) -> int:
        """Flat index of ratio ``ratio`` (0..14) for ticker ``ticker``."""
        if not (0 <= ticker < self.n_assets and 0 <= ratio < N_RATIOS):
            raise IndexError(f"(ticker={ticker}, ratio={ratio}) outside layout")
        return self.ratio_base + N_RATIOS * ticker + ratio


DEFAULT_LAYOUT = FeatureLayout(n_assets=30)  # width 511


def build_daily_vector(
    balance: float,
    prices: np.ndarray,
    holdings: np.ndarray,
    ratios: np.ndarray,
    layout: FeatureLayout = DEFAULT_LAYOUT,
) -> np.ndarray:
    """Assemble one daily feature vector.

    The layout is fixed-width: inputs whose ticker count differs from
    ``layout.n_assets`` are rejected (the default layout pins D = 30).
    """
    d = layout.n_assets
    prices = np.asarray(prices, dtype=np.float64)
    holdings = np.asarray(holdings, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    if prices.shape != (d,) or holdings.shape != (d,) or ratios.shape != (d, N_RATIOS):
        raise ValueError(
            f"layout expects D={d}: prices {prices.shape}, holdings {holdings.shape}, "
            f"ratios {ratios.shape}"
        )
    if not (
        np.isfinite(balance)
        and np.isfinite(prices).all()
        and np.isfinite(holdings).all()
        and np.isfinite(ratios).all()
    ):
        raise ValueError("non-finite input to daily feature vector")

    vec = np.empty(layout.width, dtype=np.float64)
    vec[0] = balance
    vec[layout.price_slice] = prices
    vec[layout.holding_slice] = holdings
    vec[layout.ratio_base:] = ratios.reshape(-1)
    return vec


def init_window(
    ds: MarketDataset,
    start_index: int,
    balance: float,
    holdings: np.ndarray,
    window: int = WINDOW,
) -> np.ndarray:
    """Seed the state matrix from ``window`` consecutive dataset days.

    Every seed row carries the *given* balance and holdings unchanged; no
    trading is simulated retroactively.
    """
    if start_index < 0 or start_index + window > ds.n_days:
        raise ValueError(
            f"need days [{start_index}, {start_index + window}) but dataset has {ds.n_days}"
        )
    layout = FeatureLayout(ds.n_assets)
    m = np.empty((window, layout.width), dtype=np.float64)
    for i in range(window):
        t = start_index + i
        m[i] = build_daily_vector(balance, ds.prices[t], holdings, ds.ratios[t], layout)
    return m


def shift_window(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Drop the oldest row, append ``v`` as the newest. Input is untouched."""
    if m.ndim != 2 or v.shape != (m.shape[1],):
        raise ValueError(f"shape mismatch: matrix {m.shape}, vector {v.shape}")
    out = np.empty_like(m)
    out[:-1] = m[1:]
    out[-1] = v
    return out


def window_to_csv(m: np.ndarray, path) -> None:
    """Debug dump: headerless CSV, one row per window day."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


@dataclass(frozen=True)
class WindowStats:
    """Per-column location/scale used to condition network input."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean/std must be 1-D arrays of equal length")


def normalize_window(m: np.ndarray, stats: WindowStats) -> np.ndarray:
    """Column-wise ``(x - mean) / max(std, eps)``."""
    if stats.mean.shape[0] != m.shape[-1]:
        raise ValueError(
            f"stats dimension {stats.mean.shape[0]} != window width {m.shape[-1]}"
        )
    return (m - stats.mean) / np.maximum(stats.std, NORM_EPS)


def denormalize_window(m: np.ndarray, stats: WindowStats) -> np.ndarray:
    """Inverse of ``normalize_window`` on non-degenerate columns."""
    if stats.mean.shape[0] != m.shape[-1]:
        raise ValueError(
            f"stats dimension {stats.mean.shape[0]} != window width {m.shape[-1]}"
        )
    return m * np.maximum(stats.std, NORM_EPS) + stats.mean


def stats_from_dataset(ds: MarketDataset, initial_balance: float, hmax: int) -> WindowStats:
    """Compute input-conditioning stats from a training split.

    Market columns (prices, ratios) get their empirical per-column mean and
    standard deviation. Portfolio columns cannot be known ahead of trading,
    so they get pure scale factors: the balance column is scaled by the
    initial balance and holdings columns by ``hmax``, keeping those features
    near unit magnitude for any reachable portfolio.
    """
    layout = FeatureLayout(ds.n_assets)
    mean = np.zeros(layout.width)
    std = np.ones(layout.width)

    mean[0], std[0] = 0.0, float(initial_balance)
    mean[layout.price_slice] = ds.prices.mean(axis=0)
    std[layout.price_slice] = ds.prices.std(axis=0)
    std[layout.holding_slice] = float(hmax)
    flat_ratios = ds.ratios.reshape(ds.n_days, -1)
    mean[layout.ratio_base:] = flat_ratios.mean(axis=0)
    std[layout.ratio_base:] = flat_ratios.std(axis=0)
    return WindowStats(mean=mean, std=std)
