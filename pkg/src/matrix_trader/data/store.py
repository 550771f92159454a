"""Dataset directory format: meta.json + prices.csv + ratios.csv.

Writes are deterministic (fixed ordering, repr float formatting), so
re-running ingestion on the same inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
from datetime import date
from pathlib import Path

import numpy as np

from matrix_trader.data.align import MarketDataset
from matrix_trader.data.ratios import N_RATIOS, RATIO_NAMES
from matrix_trader.data.records import DataError

META_NAME = "meta.json"
PRICES_NAME = "prices.csv"
RATIOS_NAME = "ratios.csv"


def save_dataset(ds: MarketDataset, out_dir: str | Path) -> Path:
    """Persist a dataset as a directory; returns the directory path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    meta = {
        "tickers": list(ds.tickers),
        "calendar": [d.isoformat() for d in ds.calendar],
        "ticker_order": "lexicographic",
    }
    (out / META_NAME).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    with (out / PRICES_NAME).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "ticker", "close"])
        for i, day in enumerate(ds.calendar):
            iso = day.isoformat()
            for j, ticker in enumerate(ds.tickers):
                w.writerow([iso, ticker, repr(float(ds.prices[i, j]))])

    with (out / RATIOS_NAME).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "ticker", "ratio_name", "value"])
        for i, day in enumerate(ds.calendar):
            iso = day.isoformat()
            for j, ticker in enumerate(ds.tickers):
                for k, name in enumerate(RATIO_NAMES):
                    w.writerow([iso, ticker, name, repr(float(ds.ratios[i, j, k]))])
    return out


def load_dataset(in_dir: str | Path) -> MarketDataset:
    """Load a dataset directory written by ``save_dataset``."""
    src = Path(in_dir)
    meta_path = src / META_NAME
    if not meta_path.is_file():
        raise DataError(f"not a dataset directory (no {META_NAME}): {src}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    tickers = tuple(meta["tickers"])
    calendar = tuple(date.fromisoformat(d) for d in meta["calendar"])
    t_index = {d: i for i, d in enumerate(calendar)}
    j_index = {t: j for j, t in enumerate(tickers)}
    k_index = {name: k for k, name in enumerate(RATIO_NAMES)}

    prices = np.full((len(calendar), len(tickers)), np.nan)
    with (src / PRICES_NAME).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            prices[t_index[date.fromisoformat(row[0])], j_index[row[1]]] = float(row[2])

    ratios = np.full((len(calendar), len(tickers), N_RATIOS), np.nan)
    with (src / RATIOS_NAME).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            i = t_index[date.fromisoformat(row[0])]
            ratios[i, j_index[row[1]], k_index[row[2]]] = float(row[3])

    if np.isnan(prices).any() or np.isnan(ratios).any():
        raise DataError(f"{src}: dataset has missing cells")
    return MarketDataset(tickers=tickers, calendar=calendar, prices=prices, ratios=ratios)
