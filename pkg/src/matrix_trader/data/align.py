"""Calendar alignment and the aligned daily panel (`MarketDataset`)."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import numpy as np

from matrix_trader.data.ratios import N_RATIOS, compute_financial_ratios
from matrix_trader.data.records import DataError, FundamentalsRecord, OhlcvRecord


@dataclass(frozen=True)
class MarketDataset:
    """Aligned daily panel of prices and forward-filled ratios.

    Immutable after construction: the arrays are marked read-only, so a
    dataset may be shared freely across threads/environments.

    Ticker order is lexicographic and fixed at construction; every array's
    second axis follows it.
    """

    tickers: tuple[str, ...]
    calendar: tuple[date, ...]
    prices: np.ndarray  # (T, D) float64, strictly positive
    ratios: np.ndarray  # (T, D, N_RATIOS) float64

    def __post_init__(self) -> None:
        t, d = len(self.calendar), len(self.tickers)
        if self.prices.shape != (t, d):
            raise ValueError(f"prices shape {self.prices.shape} != ({t}, {d})")
        if self.ratios.shape != (t, d, N_RATIOS):
            raise ValueError(f"ratios shape {self.ratios.shape} != ({t}, {d}, {N_RATIOS})")
        if list(self.tickers) != sorted(self.tickers):
            raise ValueError("tickers must be in lexicographic order")
        self.prices.flags.writeable = False
        self.ratios.flags.writeable = False

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    @property
    def n_assets(self) -> int:
        return len(self.tickers)


def align_and_fill(
    prices: Mapping[str, Sequence[OhlcvRecord]],
    fundamentals: Mapping[str, Sequence[FundamentalsRecord]],
) -> MarketDataset:
    """Align per-ticker series onto a shared calendar and forward-fill ratios.

    The calendar is the intersection of all tickers' trading days, trimmed
    from the front so that every ticker has at least one fundamentals report
    on or before every kept day. Each day's ratio slice comes from the most
    recent report on or before that day.
    """
    tickers = tuple(sorted(prices))
    if not tickers:
        raise DataError("no price series given")
    missing = [t for t in tickers if not fundamentals.get(t)]
    if missing:
        raise DataError(f"no fundamentals for ticker(s): {', '.join(missing)}")

    date_sets = [frozenset(r.date for r in prices[t]) for t in tickers]
    shared = frozenset.intersection(*date_sets)
    first_report = max(min(r.report_date for r in fundamentals[t]) for t in tickers)
    calendar = tuple(sorted(d for d in shared if d >= first_report))
    if not calendar:
        raise DataError(
            "empty calendar after intersection/trim "
            f"(first universal report date {first_report})"
        )

    t_len, d_len = len(calendar), len(tickers)
    price_mat = np.empty((t_len, d_len), dtype=np.float64)
    ratio_mat = np.empty((t_len, d_len, N_RATIOS), dtype=np.float64)

    for j, ticker in enumerate(tickers):
        by_date = {r.date: r.close for r in prices[ticker]}
        reports = sorted(fundamentals[ticker], key=lambda r: r.report_date)
        report_ratios = [compute_financial_ratios(r) for r in reports]
        k = 0
        for i, day in enumerate(calendar):
            price_mat[i, j] = by_date[day]
            while k + 1 < len(reports) and reports[k + 1].report_date <= day:
                k += 1
            ratio_mat[i, j] = report_ratios[k]

    return MarketDataset(tickers=tickers, calendar=calendar, prices=price_mat, ratios=ratio_mat)


def split(ds: MarketDataset, boundary: date) -> tuple[MarketDataset, MarketDataset]:
    """Split into (train: days < boundary, test: days >= boundary).

    The boundary must fall strictly inside the calendar so both parts are
    non-empty.
    """
    if not (ds.calendar[0] < boundary <= ds.calendar[-1]):
        raise ValueError(
            f"boundary {boundary} outside calendar "
            f"[{ds.calendar[0]} .. {ds.calendar[-1]}]"
        )
    cut = int(np.searchsorted([d.toordinal() for d in ds.calendar], boundary.toordinal()))
    train = MarketDataset(
        tickers=ds.tickers,
        calendar=ds.calendar[:cut],
        prices=ds.prices[:cut].copy(),
        ratios=ds.ratios[:cut].copy(),
    )
    test = MarketDataset(
        tickers=ds.tickers,
        calendar=ds.calendar[cut:],
        prices=ds.prices[cut:].copy(),
        ratios=ds.ratios[cut:].copy(),
    )
    return train, test


def split_by_fraction(ds: MarketDataset, fraction: float
                      ) -> tuple[MarketDataset, MarketDataset]:
    """Split so the train part holds the first `fraction` of the days."""
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"split fraction must be in (0, 1), got {fraction}")
    cut = int(ds.n_days * fraction)
    if cut < 1 or cut >= ds.n_days:
        raise ValueError(
            f"fraction {fraction} leaves an empty split for {ds.n_days} days"
        )
    return split(ds, ds.calendar[cut])
