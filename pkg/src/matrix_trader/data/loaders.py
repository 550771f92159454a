"""CSV loaders for raw prices and fundamentals.

Prices CSV: header ``date,ticker,close`` (ISO-8601 date, symbol, decimal).
Fundamentals CSV: header ``report_date,ticker,<15 statement columns>`` in
``FUNDAMENTAL_FIELDS`` order. Both UTF-8, comma-separated, ``.`` decimal.
"""

from __future__ import annotations

import csv
import logging
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from matrix_trader.data.records import (
    FUNDAMENTAL_FIELDS,
    DataError,
    FundamentalsRecord,
    OhlcvRecord,
)

log = logging.getLogger(__name__)

PRICES_HEADER = ("date", "ticker", "close")
FUNDAMENTALS_HEADER = ("report_date", "ticker") + FUNDAMENTAL_FIELDS


def _read_rows(path: str | Path, expected_header: Sequence[str]) -> Iterable[tuple[int, list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != list(expected_header):
            raise DataError(
                f"{path}: unexpected header {header!r}, expected {list(expected_header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected_header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(expected_header)} columns, got {len(row)}"
                )
            yield lineno, row


def _parse_date(raw: str, path: Path | str, lineno: int) -> date:
    try:
        return date.fromisoformat(raw.strip())
    except ValueError:
        raise DataError(f"{path}:{lineno}: malformed date {raw!r}") from None


def _parse_float(raw: str, path: Path | str, lineno: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{path}:{lineno}: malformed {col} value {raw!r}") from None


def load_prices(path: str | Path, tickers: Sequence[str] | None = None
                ) -> dict[str, list[OhlcvRecord]]:
    """Load close-price series for the requested tickers.

    With ``tickers=None`` every ticker in the file is loaded. Otherwise
    one strictly date-sorted series per requested ticker is returned;
    tickers present in the file but not requested are skipped (and
    logged). Raises ``DataError`` on malformed rows, non-positive prices,
    duplicate dates, or requested tickers absent from the file.
    """
    requested = None if tickers is None else list(tickers)
    series: dict[str, list[OhlcvRecord]] = (
        {} if requested is None else {t: [] for t in requested}
    )
    unknown: set[str] = set()
    for lineno, row in _read_rows(path, PRICES_HEADER):
        ticker = row[1].strip()
        if requested is None:
            series.setdefault(ticker, [])
        elif ticker not in series:
            unknown.add(ticker)
            continue
        rec = OhlcvRecord(
            ticker=ticker,
            date=_parse_date(row[0], path, lineno),
            close=_parse_float(row[2], path, lineno, "close"),
        )
        try:
            rec.validate()
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        series[ticker].append(rec)

    if unknown:
        log.warning("%s: skipped %d unrequested tickers: %s",
                    path, len(unknown), ", ".join(sorted(unknown)))
    if requested is not None:
        missing = [t for t in requested if not series[t]]
        if missing:
            raise DataError(f"{path}: missing ticker(s): {', '.join(missing)}")
    elif not series:
        raise DataError(f"{path}: no price rows found")

    for ticker, recs in series.items():
        recs.sort(key=lambda r: r.date)
        for prev, cur in zip(recs, recs[1:]):
            if cur.date == prev.date:
                raise DataError(f"{path}: duplicate date {cur.date} for ticker {ticker}")
    return series


def load_fundamentals(path: str | Path) -> dict[str, list[FundamentalsRecord]]:
    """Load fundamentals series for every ticker present in the file.

    Series come back sorted by report date. Any report cadence is accepted;
    duplicate report dates per ticker and invariant violations raise
    ``DataError``.
    """
    series: dict[str, list[FundamentalsRecord]] = {}
    for lineno, row in _read_rows(path, FUNDAMENTALS_HEADER):
        ticker = row[1].strip()
        figures = {
            name: _parse_float(raw, path, lineno, name)
            for name, raw in zip(FUNDAMENTAL_FIELDS, row[2:])
        }
        rec = FundamentalsRecord(
            ticker=ticker,
            report_date=_parse_date(row[0], path, lineno),
            **figures,
        )
        try:
            rec.validate()
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        series.setdefault(ticker, []).append(rec)

    for ticker, recs in series.items():
        recs.sort(key=lambda r: r.report_date)
        for prev, cur in zip(recs, recs[1:]):
            if cur.report_date == prev.report_date:
                raise DataError(
                    f"{path}: duplicate report date {cur.report_date} for ticker {ticker}"
                )
    return series
