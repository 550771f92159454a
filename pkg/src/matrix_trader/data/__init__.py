"""Data ingestion: raw files -> aligned daily panel of prices and ratios."""

from matrix_trader.data.align import MarketDataset, align_and_fill, split
from matrix_trader.data.loaders import load_fundamentals, load_prices
from matrix_trader.data.ratios import RATIO_NAMES, compute_financial_ratios
from matrix_trader.data.records import DataError, FundamentalsRecord, OhlcvRecord
from matrix_trader.data.store import load_dataset, save_dataset
from matrix_trader.data.synthetic import REGIMES, generate_synthetic_market

__all__ = [
    "DataError",
    "FundamentalsRecord",
    "MarketDataset",
    "OhlcvRecord",
    "RATIO_NAMES",
    "REGIMES",
    "align_and_fill",
    "compute_financial_ratios",
    "generate_synthetic_market",
    "load_dataset",
    "load_fundamentals",
    "load_prices",
    "save_dataset",
    "split",
]
