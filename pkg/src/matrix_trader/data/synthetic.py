"""Seeded synthetic markets for tests and desk-scale experiments.

Prices follow geometric paths with regime-dependent drift; ratios are drawn
once per synthetic quarter (63 trading days) and forward-filled, mimicking
the cadence of real statement data.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from matrix_trader.data.align import MarketDataset
from matrix_trader.data.ratios import N_RATIOS

REGIMES = ("uptrend", "downtrend", "mixed", "random-walk")

QUARTER_DAYS = 63  # ~one quarter of a 252-day trading year

# Plausible per-ratio centers used to seed synthetic fundamentals,
# in RATIO_NAMES order.
_RATIO_CENTERS = np.array(
    [1.8, 0.6, 1.2, 0.55, 1.4, 6.0, 8.0, 6.5, 0.18, 0.11, 0.07, 0.15, 5.0, 30.0, 1.2]
)

_START = date(2015, 1, 5)  # a Monday; synthetic calendar is consecutive weekdays


def _weekday_calendar(days: int) -> tuple[date, ...]:
    out = []
    d = _START
    while len(out) < days:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return tuple(out)


def _drifts(rng: np.random.Generator, n: int, regime: str) -> tuple[np.ndarray, np.ndarray]:
    sigma = rng.uniform(0.008, 0.02, size=n)
    if regime == "uptrend":
        mu = rng.uniform(0.0008, 0.002, size=n)
    elif regime == "downtrend":
        mu = -rng.uniform(0.0008, 0.002, size=n)
    elif regime == "mixed":
        mag = rng.uniform(0.0008, 0.002, size=n)
        sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        mu = mag * sign
    elif regime == "random-walk":
        mu = np.zeros(n)
    else:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    return mu, sigma


def generate_synthetic_market(
    seed: int, days: int, tickers: int, regime: str = "random-walk"
) -> MarketDataset:
    """Generate a deterministic synthetic `MarketDataset`.

    ``days`` must be at least 91 so a 90-day window plus one step fits.
    Under ``uptrend``/``downtrend`` (and per-ticker under ``mixed``) the
    total drift is enforced by construction: if the sampled path misses the
    direction, a constant per-step shift restores it, so e.g. every uptrend
    ticker ends above its first price.
    """
    if days < 91:
        raise ValueError(f"days must be >= 91 (90-day window plus one step), got {days}")
    if tickers < 1:
        raise ValueError(f"tickers must be >= 1, got {tickers}")

    rng = np.random.default_rng(seed)
    pad = max(2, len(str(tickers - 1)))
    symbols = tuple(f"SYN{i:0{pad}d}" for i in range(tickers))

    mu, sigma = _drifts(rng, tickers, regime)
    p0 = rng.uniform(20.0, 200.0, size=tickers)
    z = rng.standard_normal((days - 1, tickers))
    log_ret = mu[None, :] + sigma[None, :] * z

    if regime != "random-walk":
        # Enforce the regime direction: total log-return of at least ~5%
        # magnitude with the drift's sign.
        min_total = np.log(1.05)
        total = log_ret.sum(axis=0)
        target = np.sign(mu) * min_total
        short = np.where(np.sign(mu) * total < min_total, target - total, 0.0)
        log_ret = log_ret + short[None, :] / (days - 1)

    prices = np.empty((days, tickers), dtype=np.float64)
    prices[0] = p0
    prices[1:] = p0[None, :] * np.exp(np.cumsum(log_ret, axis=0))

    n_quarters = -(-days // QUARTER_DAYS)
    base = _RATIO_CENTERS[None, :] * rng.uniform(0.7, 1.3, size=(tickers, N_RATIOS))
    quarterly = base[None, :, :] * (
        1.0 + 0.05 * rng.standard_normal((n_quarters, tickers, N_RATIOS))
    )
    day_idx = np.arange(days) // QUARTER_DAYS
    ratios = quarterly[day_idx]  # forward-fill by construction

    return MarketDataset(
        tickers=symbols,
        calendar=_weekday_calendar(days),
        prices=prices,
        ratios=np.ascontiguousarray(ratios),
    )
