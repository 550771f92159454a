"""Shared test fixtures and dataset builders."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from matrix_trader.data.align import MarketDataset
from matrix_trader.data.ratios import N_RATIOS
from matrix_trader.data.synthetic import generate_synthetic_market


def make_dataset(prices, ratios=None, start=date(2020, 1, 1)) -> MarketDataset:
    """Dataset from a raw (T, D) price array, consecutive calendar days."""
    prices = np.asarray(prices, dtype=np.float64)
    t, d = prices.shape
    if ratios is None:
        ratios = np.zeros((t, d, N_RATIOS))
    tickers = tuple(f"T{j:02d}" for j in range(d))
    calendar = tuple(start + timedelta(days=i) for i in range(t))
    return MarketDataset(tickers=tickers, calendar=calendar,
                         prices=prices, ratios=np.asarray(ratios, dtype=np.float64))


def random_dataset(seed: int, days: int, tickers: int) -> MarketDataset:
    """Random positive prices and ratios, no drift structure."""
    rng = np.random.default_rng(seed)
    prices = rng.uniform(10.0, 200.0, size=(days, tickers))
    ratios = rng.standard_normal((days, tickers, N_RATIOS))
    return make_dataset(prices, ratios)


@pytest.fixture(scope="session")
def synth_ds() -> MarketDataset:
    """Small but window-capable synthetic market (3 tickers, 100 days)."""
    return generate_synthetic_market(123, days=100, tickers=3)
