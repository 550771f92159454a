"""Row-level record types shared by the ingestion pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from datetime import date


class DataError(ValueError):
    """Raised for malformed input files or violated data invariants."""


@dataclass(frozen=True, order=True)
class OhlcvRecord:
    """One adjusted daily close for one ticker.

    Open/high/low/volume columns in source files are accepted and ignored;
    only the close is consumed downstream.
    """

    ticker: str
    date: date
    close: float

    def validate(self) -> None:
        if not math.isfinite(self.close) or self.close <= 0.0:
            raise DataError(
                f"non-positive price for {self.ticker} on {self.date}: {self.close}"
            )


# Statement figures, in the column order of the fundamentals CSV.
FUNDAMENTAL_FIELDS = (
    "current_assets",
    "cash",
    "inventory",
    "current_liabilities",
    "total_liabilities",
    "total_assets",
    "equity",
    "cogs",
    "receivables",
    "payables",
    "revenue",
    "operating_income",
    "net_income",
    "shares_outstanding",
    "dividends_paid",
)


@dataclass(frozen=True)
class FundamentalsRecord:
    """One statement snapshot for one ticker as of ``report_date``.

    All figures are USD amounts except ``shares_outstanding`` (a count).
    """

    ticker: str
    report_date: date
    current_assets: float
    cash: float
    inventory: float
    current_liabilities: float
    total_liabilities: float
    total_assets: float
    equity: float
    cogs: float
    receivables: float
    payables: float
    revenue: float
    operating_income: float
    net_income: float
    shares_outstanding: float
    dividends_paid: float

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise DataError(
                    f"invariant violation for {self.ticker} @ {self.report_date}: "
                    f"{f.name} is not finite"
                )
        if self.total_assets <= 0.0:
            raise DataError(
                f"invariant violation for {self.ticker} @ {self.report_date}: "
                f"total_assets must be > 0, got {self.total_assets}"
            )
        if self.shares_outstanding <= 0.0:
            raise DataError(
                f"invariant violation for {self.ticker} @ {self.report_date}: "
                f"shares_outstanding must be > 0, got {self.shares_outstanding}"
            )
