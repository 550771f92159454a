"""The fifteen financial ratios that make up a company's fundamentals slice.

Order is fixed and load-bearing: the per-ticker block of the daily feature
vector stores these fifteen values consecutively in exactly this order.
"""

from __future__ import annotations

import numpy as np

from matrix_trader.data.records import FundamentalsRecord

# Fixed ratio order: liquidity, leverage, efficiency, profitability, market value.
RATIO_NAMES = (
    "current_ratio",
    "cash_ratio",
    "quick_ratio",
    "debt_ratio",
    "debt_to_equity",
    "inventory_turnover",
    "receivables_turnover",
    "payables_turnover",
    "operating_margin",
    "net_profit_margin",
    "return_on_assets",
    "return_on_equity",
    "eps",
    "book_per_share",
    "dividend_per_share",
)

N_RATIOS = len(RATIO_NAMES)


def _safe_div(num: float, den: float) -> float:
    # Degenerate statements (zero or negative denominator) map to 0.0 so the
    # feature matrix stays finite.
    if den <= 0.0:
        return 0.0
    return num / den


def compute_financial_ratios(rec: FundamentalsRecord) -> np.ndarray:
    """Compute the 15-element ratio vector for one fundamentals record.

    Returns a float64 array in ``RATIO_NAMES`` order. Never raises on
    degenerate denominators; those entries become 0.0.
    """
    values = (
        _safe_div(rec.current_assets, rec.current_liabilities),
        _safe_div(rec.cash, rec.current_liabilities),
        _safe_div(rec.current_assets - rec.inventory, rec.current_liabilities),
        _safe_div(rec.total_liabilities, rec.total_assets),
        _safe_div(rec.total_liabilities, rec.equity),
        _safe_div(rec.cogs, rec.inventory),
        _safe_div(rec.revenue, rec.receivables),
        _safe_div(rec.cogs, rec.payables),
        _safe_div(rec.operating_income, rec.revenue),
        _safe_div(rec.net_income, rec.revenue),
        _safe_div(rec.net_income, rec.total_assets),
        _safe_div(rec.net_income, rec.equity),
        _safe_div(rec.net_income, rec.shares_outstanding),
        _safe_div(rec.equity, rec.shares_outstanding),
        _safe_div(rec.dividends_paid, rec.shares_outstanding),
    )
    return np.array(values, dtype=np.float64)


def ratios_as_dict(vec: np.ndarray) -> dict[str, float]:
    """Name the entries of a ratio vector (mainly for reporting/tests)."""
    if vec.shape != (N_RATIOS,):
        raise ValueError(f"expected shape ({N_RATIOS},), got {vec.shape}")
    return {name: float(v) for name, v in zip(RATIO_NAMES, vec)}
