"""The stock-trading MDP.

One step: clamp and scale the action to integer share deltas, execute all
sells then all buys at the current day's close with a fixed percentage cost
per side, advance one day, and reward the (scaled) change in portfolio
value. The observation is the sliding window of daily feature vectors.

An environment instance is single-threaded; run independent instances for
parallel collection (they share the immutable dataset read-only).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from matrix_trader.data.align import MarketDataset
from matrix_trader.features import (
    WINDOW,
    FeatureLayout,
    build_daily_vector,
    init_window,
    shift_window,
)

TRADE_LOG_HEADER = (
    "step", "date", "ticker", "delta_shares", "price", "cost",
    "balance_after", "value_after",
)


@dataclass(frozen=True)
class EnvConfig:
    initial_balance: float = 1_000_000.0
    hmax: int = 1000
    cost_rate: float = 0.001  # fraction of trade notional, charged per side
    reward_scale: float = 1e-6
    turbulence_lookback: int = 252
    window: int = WINDOW

    def __post_init__(self) -> None:
        if self.hmax < 1:
            raise ValueError(f"hmax must be >= 1, got {self.hmax}")
        if not (0.0 <= self.cost_rate < 1.0):
            raise ValueError(f"cost_rate must be in [0, 1), got {self.cost_rate}")
        if self.reward_scale <= 0.0:
            raise ValueError(f"reward_scale must be > 0, got {self.reward_scale}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


@dataclass
class PortfolioState:
    """Cash plus integer holdings; non-negative by construction."""

    balance: float
    holdings: np.ndarray  # (D,) int64
    day_index: int


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray  # the shifted window matrix
    reward: float
    done: bool
    info: dict


@dataclass(frozen=True)
class TradeRecord:
    step: int
    date: str
    ticker: str
    delta_shares: int
    price: float
    cost: float
    balance_after: float
    value_after: float


def clamp_action(a: np.ndarray, n_assets: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n_assets,):
        raise ValueError(f"action shape {a.shape}, expected ({n_assets},)")
    return np.clip(a, -1.0, 1.0)


def scale_action(a: np.ndarray, hmax: int) -> np.ndarray:
    """Map [-1, 1] actions to integer share deltas in [-hmax, hmax].

    Fractional shares truncate toward zero, so the magnitude never exceeds
    the request and the sign is preserved (or the delta is zero).
    """
    return np.trunc(np.asarray(a, dtype=np.float64) * hmax).astype(np.int64)


def portfolio_value(p: PortfolioState, prices: np.ndarray) -> float:
    """Cash plus holdings marked at the given prices."""
    return float(p.balance + np.dot(prices, p.holdings))


def apply_trades(
    p: PortfolioState, prices: np.ndarray, deltas: np.ndarray, cost_rate: float
) -> tuple[PortfolioState, float]:
    """Execute share deltas at the given prices; returns (new state, cost paid).

    All sells run first (freeing cash), then all buys, each in ticker order.
    Sells are clipped to current holdings; buys are clipped to the largest
    share count affordable from the running balance including the cost, so
    the balance can never go negative. Infeasible requests are clipped, not
    rejected.
    """
    if np.any(prices <= 0.0):
        raise ValueError("prices must be strictly positive")
    balance = p.balance
    holdings = p.holdings.copy()
    cost_paid = 0.0

    sell_order = np.nonzero(deltas < 0)[0]
    for d in sell_order:
        qty = min(int(-deltas[d]), int(holdings[d]))
        if qty == 0:
            continue
        notional = qty * float(prices[d])
        fee = notional * cost_rate
        balance += notional - fee
        holdings[d] -= qty
        cost_paid += fee

    buy_order = np.nonzero(deltas > 0)[0]
    for d in buy_order:
        price = float(prices[d])
        unit = price * (1.0 + cost_rate)
        qty = min(int(deltas[d]), int(balance / unit))
        while qty > 0 and qty * unit > balance:  # guard against float round-up
            qty -= 1
        if qty == 0:
            continue
        notional = qty * price
        fee = notional * cost_rate
        balance -= notional + fee
        holdings[d] += qty
        cost_paid += fee

    return PortfolioState(balance=balance, holdings=holdings, day_index=p.day_index), cost_paid


def compute_turbulence(ds: MarketDataset, day_index: int, lookback: int) -> float:
    """Mahalanobis distance of today's cross-sectional return vector.

    Measured against the mean/covariance of the previous ``lookback`` days'
    return vectors (covariance pseudo-inverse, so rank deficiency is fine).
    Returns 0.0 when fewer than ``lookback + 1`` prior days exist.
    """
    if day_index < lookback + 1:
        return 0.0
    rets = ds.prices[day_index - lookback - 1 : day_index + 1]
    rets = rets[1:] / rets[:-1] - 1.0  # lookback history rows + today as the last
    window = rets[:-1]
    y = rets[-1]
    mu = window.mean(axis=0)
    cov = np.cov(window, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    dev = y - mu
    return float(dev @ np.linalg.pinv(cov) @ dev)


class TradingEnv:
    """Episodic trading environment over an immutable `MarketDataset`.

    The trade log, step counter, and cumulative cost persist across
    `reset()` calls so a training run with auto-resets yields one
    continuous audit trail. The equity curve tracks the current episode
    only. Use a fresh instance for a clean single-episode log.
    """

    def __init__(self, ds: MarketDataset, cfg: EnvConfig = EnvConfig()):
        if ds.n_days <= cfg.window:
            raise ValueError(
                f"dataset has {ds.n_days} days; need more than window={cfg.window}"
            )
        self.ds = ds
        self.cfg = cfg
        self.layout = FeatureLayout(ds.n_assets)
        self._turbulence = self._turbulence_series()
        self._state: np.ndarray | None = None
        self.portfolio: PortfolioState | None = None
        self.trade_records: list[TradeRecord] = []
        self.equity_curve: list[float] = []
        self.total_cost = 0.0
        self.episode_start_day = cfg.window - 1
        self._step_count = 0

    def _turbulence_series(self) -> np.ndarray:
        out = np.zeros(self.ds.n_days)
        for t in range(self.cfg.turbulence_lookback + 1, self.ds.n_days):
            out[t] = compute_turbulence(self.ds, t, self.cfg.turbulence_lookback)
        return out

    def reset(self, start_index: int = 0) -> np.ndarray:
        """Start an episode; returns the seeded window matrix."""
        if start_index < 0 or start_index + self.cfg.window >= self.ds.n_days:
            raise ValueError(
                f"start_index {start_index} leaves no step: window {self.cfg.window}, "
                f"dataset {self.ds.n_days} days"
            )
        holdings = np.zeros(self.ds.n_assets, dtype=np.int64)
        self.episode_start_day = start_index + self.cfg.window - 1
        self.portfolio = PortfolioState(
            balance=self.cfg.initial_balance,
            holdings=holdings,
            day_index=self.episode_start_day,
        )
        self._state = init_window(
            self.ds, start_index, self.cfg.initial_balance, holdings, self.cfg.window
        )
        self.equity_curve = [self.cfg.initial_balance]
        return self._state.copy()

    @property
    def state(self) -> np.ndarray:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state.copy()

    @property
    def done(self) -> bool:
        if self.portfolio is None:
            return True
        return self.portfolio.day_index >= self.ds.n_days - 1

    def current_value(self) -> float:
        """Portfolio value at the current day's prices."""
        p = self._require_portfolio()
        return portfolio_value(p, self.ds.prices[p.day_index])

    def _require_portfolio(self) -> PortfolioState:
        if self.portfolio is None:
            raise RuntimeError("environment not reset")
        return self.portfolio

    def step(self, action: np.ndarray) -> StepResult:
        p = self._require_portfolio()
        if self.done:
            raise RuntimeError("step() called on a finished episode")

        t = p.day_index
        prices_now = self.ds.prices[t]
        value_before = portfolio_value(p, prices_now)

        a = clamp_action(action, self.ds.n_assets)
        deltas = scale_action(a, self.cfg.hmax)
        new_p, cost_paid = apply_trades(p, prices_now, deltas, self.cfg.cost_rate)
        executed = new_p.holdings - p.holdings
        self._log_trades(t, prices_now, executed)

        new_p.day_index = t + 1
        self.portfolio = new_p
        prices_next = self.ds.prices[new_p.day_index]
        value_after = portfolio_value(new_p, prices_next)
        reward = (value_after - value_before) * self.cfg.reward_scale

        vec = build_daily_vector(
            new_p.balance,
            prices_next,
            new_p.holdings,
            self.ds.ratios[new_p.day_index],
            self.layout,
        )
        self._state = shift_window(self._state, vec)
        self._step_count += 1
        self.equity_curve.append(value_after)

        info = {
            "portfolio_value": value_after,
            "cost_paid": cost_paid,
            "turbulence": float(self._turbulence[new_p.day_index]),
            "trades_executed": executed,
            "date": self.ds.calendar[new_p.day_index],
        }
        return StepResult(
            next_state=self._state.copy(), reward=reward, done=self.done, info=info
        )

    def _log_trades(self, t: int, prices: np.ndarray, executed: np.ndarray) -> None:
        # Replay the execution order (sells then buys) to record running
        # balances per fill exactly as the accounting produced them.
        if not np.any(executed):
            return
        balance = self._require_portfolio().balance
        holdings = self._require_portfolio().holdings.copy()
        day = self.ds.calendar[t].isoformat()
        for phase in (-1, 1):
            for d in np.nonzero(np.sign(executed) == phase)[0]:
                qty = int(executed[d])
                notional = abs(qty) * float(prices[d])
                fee = notional * self.cfg.cost_rate
                balance -= qty * float(prices[d]) + fee
                holdings[d] += qty
                value = balance + float(np.dot(prices, holdings))
                self.total_cost += fee  # per fill, in trade-log row order
                self.trade_records.append(
                    TradeRecord(
                        step=self._step_count,
                        date=day,
                        ticker=self.ds.tickers[d],
                        delta_shares=qty,
                        price=float(prices[d]),
                        cost=fee,
                        balance_after=balance,
                        value_after=value,
                    )
                )

    def write_trade_log(self, path: str | Path) -> None:
        write_trade_log(self.trade_records, path)


def write_trade_log(records: list[TradeRecord], path: str | Path) -> None:
    """Persist trade records as the standard trade-log CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRADE_LOG_HEADER)
        for r in records:
            w.writerow([
                r.step, r.date, r.ticker, r.delta_shares,
                repr(r.price), repr(r.cost),
                repr(r.balance_after), repr(r.value_after),
            ])
