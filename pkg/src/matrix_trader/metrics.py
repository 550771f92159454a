"""Performance statistics over equity curves and trade logs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from matrix_trader.env import TRADE_LOG_HEADER

TRADING_DAYS_PER_YEAR = 252


class UndefinedSharpeError(ValueError):
    """Raised when the return standard deviation is zero."""


def daily_returns(curve) -> np.ndarray:
    """Simple daily returns v_{t+1}/v_t - 1 of an equity curve."""
    v = np.asarray(curve, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"equity curve needs >= 2 values, got {v.size}")
    return v[1:] / v[:-1] - 1.0


def sharpe(curve, risk_free_daily: float = 0.0, annualize: bool = False) -> float:
    """Mean excess daily return over its sample standard deviation.

    Multiplied by sqrt(252) when `annualize` is set. Raises
    UndefinedSharpeError when the returns have zero variance.
    """
    v = np.asarray(curve, dtype=np.float64)
    if v.size < 3:
        raise ValueError(f"equity curve needs >= 3 values for a Sharpe, got {v.size}")
    ret = daily_returns(v)
    std = ret.std(ddof=1)
    if std == 0.0:
        raise UndefinedSharpeError("zero return variance: Sharpe undefined")
    s = (ret.mean() - risk_free_daily) / std
    if annualize:
        s *= math.sqrt(TRADING_DAYS_PER_YEAR)
    return float(s)


def max_drawdown(curve) -> float:
    """Largest peak-to-trough fraction 1 - v_t / max_{u<=t} v_u."""
    v = np.asarray(curve, dtype=np.float64)
    if v.size < 1:
        raise ValueError("empty equity curve")
    peaks = np.maximum.accumulate(v)
    return float(np.max(1.0 - v / peaks))


@dataclass(frozen=True)
class CostSummary:
    total_cost: float
    n_trades: int
    notional: float


def cumulative_cost(trade_log_path) -> CostSummary:
    """Sum the cost column of a trade-log CSV, in row order.

    Also reports the trade count and the total traded notional
    (|shares| x price per fill).
    """
    path = Path(trade_log_path)
    total = 0.0
    notional = 0.0
    n = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRADE_LOG_HEADER:
            raise ValueError(f"{path}: malformed trade log header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRADE_LOG_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(TRADE_LOG_HEADER)} columns")
            try:
                delta = int(row[3])
                price = float(row[4])
                cost = float(row[5])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed numeric field: {exc}") from None
            total += cost
            notional += abs(delta) * price
            n += 1
    return CostSummary(total_cost=total, n_trades=n, notional=notional)


@dataclass(frozen=True)
class EvaluationReport:
    final_value: float
    total_reward: float
    sharpe_daily: float | None  # None when undefined (zero variance)
    sharpe_annual: float | None
    total_cost: float
    n_trades: int
    max_drawdown: float

    def to_dict(self) -> dict:
        return {
            "final_value": self.final_value,
            "total_reward": self.total_reward,
            "sharpe_daily": self.sharpe_daily,
            "sharpe_annual": self.sharpe_annual,
            "total_cost": self.total_cost,
            "n_trades": self.n_trades,
            "max_drawdown": self.max_drawdown,
        }


def write_report(report: EvaluationReport, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def load_report(path) -> EvaluationReport:
    with Path(path).open(encoding="utf-8") as fh:
        return EvaluationReport(**json.load(fh))
