"""Threshold-entry, fixed-duration long-ADR / short-SPY backtests.

A signal on return index ``j`` (the spread realised on price day ``j + 1``)
opens a trade at that day's close: ``notional / price`` shares long the ADR
leg and short the SPY leg. The trade is closed ``duration_n`` trading days
later at the close. Trades may overlap. Trades whose exit would fall past
the last price are dropped. No costs, slippage or financing.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .marketdata import AlignedPair
from .returns import Component, compute_returns, spread

__all__ = [
    "StrategyConfig",
    "Trade",
    "BacktestReport",
    "GridResult",
    "generate_signals",
    "run_strategy",
    "grid_run",
    "DEFAULT_KS",
    "DEFAULT_DURATIONS",
    "ETF_KS",
    "DAYS_PER_YEAR",
]

DEFAULT_KS = (0.0, -0.005, -0.01, -0.015)
DEFAULT_DURATIONS = (1, 2, 3, 4, 5)
ETF_KS = (-0.004, -0.008, -0.012, -0.016)
DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class StrategyConfig:
    entry_threshold_k: float
    duration_n: int
    notional_per_leg: float = 100.0
    signal_component: Component = Component.DD

    def __post_init__(self):
        object.__setattr__(self, "signal_component", Component.parse(self.signal_component))
        if int(self.duration_n) != self.duration_n or self.duration_n < 1:
            raise ValidationError(f"duration_n must be an integer >= 1, got {self.duration_n!r}")
        object.__setattr__(self, "duration_n", int(self.duration_n))
        if not (math.isfinite(self.notional_per_leg) and self.notional_per_leg > 0):
            raise ValidationError(f"notional_per_leg must be positive, got {self.notional_per_leg!r}")
        if not math.isfinite(self.entry_threshold_k):
            raise ValidationError("entry threshold must be finite")

    def to_dict(self) -> dict:
        return {
            "k": self.entry_threshold_k,
            "duration": self.duration_n,
            "notional": self.notional_per_leg,
            "component": self.signal_component.value,
        }


@dataclass(frozen=True)
class Trade:
    entry_index: int  # price-day index of the entry close
    exit_index: int
    alpha: float  # ADR shares held long
    beta: float  # SPY shares held short
    profit: float
    entry_date: date | None = None
    exit_date: date | None = None


@dataclass(frozen=True)
class BacktestReport:
    config: StrategyConfig
    trades: tuple[Trade, ...]
    span_years: float
    total_profit: float
    annual_return: float | None
    per_trade_return: float | None
    profit_mean: float | None
    profit_std: float | None  # sample std over per-trade profits
    yearly_profits: dict[int, float] = field(default_factory=dict)
    yearly_std: float | None = None  # sample std of calendar-year profit sums

    @property
    def n_trades(self) -> int:
        return len(self.trades)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_trades": self.n_trades,
            "total_profit": self.total_profit,
            "annual_return": self.annual_return,
            "per_trade_return": self.per_trade_return,
            "profit_mean": self.profit_mean,
            "profit_std": self.profit_std,
            "annual_std": self.yearly_std,
            "span_years": self.span_years,
        }


def generate_signals(spread_values, k: float) -> list[int]:
    """Indices where the spread is strictly below ``k``."""
    v = np.asarray(getattr(spread_values, "values", spread_values), dtype=float)
    return np.flatnonzero(v < k).tolist()


def _sample_std(values: Sequence[float]) -> float | None:
    return statistics.stdev(values) if len(values) >= 2 else None


def _spread_values(pair: AlignedPair, component: Component) -> np.ndarray:
    if not (pair.left.is_adjusted and pair.right.is_adjusted):
        raise ValidationError("adjust() both legs before backtesting")
    adr = compute_returns(pair.left, component)
    spy = compute_returns(pair.right, component)
    return spread(adr, spy).values


def _report(config: StrategyConfig, signals, pair: AlignedPair) -> BacktestReport:
    a, s = pair.left.closes, pair.right.closes
    dates = pair.dates
    last = len(pair) - 1
    notional = config.notional_per_leg
    trades = []
    for j in signals:
        entry = j + 1
        exit_ = entry + config.duration_n
        if exit_ > last:
            continue
        alpha = notional / a[entry]
        beta = notional / s[entry]
        profit = alpha * (a[exit_] - a[entry]) - beta * (s[exit_] - s[entry])
        trades.append(
            Trade(entry, exit_, float(alpha), float(beta), float(profit), dates[entry], dates[exit_])
        )

    span_years = (dates[-1] - dates[0]).days / DAYS_PER_YEAR
    profits = [t.profit for t in trades]
    total = math.fsum(profits)
    yearly: dict[int, list[float]] = {y: [] for y in range(dates[0].year, dates[-1].year + 1)}
    for t in trades:
        yearly[t.exit_date.year].append(t.profit)
    yearly_sums = {y: math.fsum(p) for y, p in yearly.items()}
    n = len(trades)
    return BacktestReport(
        config=config,
        trades=tuple(trades),
        span_years=span_years,
        total_profit=total,
        annual_return=total / span_years if n and span_years > 0 else None,
        per_trade_return=total / n if n else None,
        profit_mean=total / n if n else None,
        profit_std=_sample_std(profits),
        yearly_profits=yearly_sums,
        yearly_std=_sample_std(list(yearly_sums.values())) if n else None,
    )


def run_strategy(pair: AlignedPair, config: StrategyConfig) -> BacktestReport:
    """Backtest one (k, N) configuration on an adjusted, aligned pair.

    ``pair.left`` is the long (ADR/ETF) leg, ``pair.right`` the short SPY leg.
    With no trades the normalised returns are ``None``.
    """
    x = _spread_values(pair, config.signal_component)
    return _report(config, generate_signals(x, config.entry_threshold_k), pair)


@dataclass(frozen=True)
class GridResult:
    ks: tuple[float, ...]
    durations: tuple[int, ...]
    reports: dict[tuple[float, int], BacktestReport]

    def __len__(self) -> int:
        return len(self.reports)

    def __getitem__(self, key: tuple[float, int]) -> BacktestReport:
        return self.reports[key]

    def matrix(self) -> list[list[BacktestReport]]:
        """Reports as rows over ``ks`` and columns over ``durations``."""
        return [[self.reports[(k, n)] for n in self.durations] for k in self.ks]

    def scatter_rows(self) -> list[dict]:
        """Mean/risk rows per cell for both normalisations.

        ``annual``: mean = annual return, std = std of calendar-year profit sums.
        ``per_trade``: mean = per-trade return, std = std of per-trade profits.
        """
        rows = []
        for k in self.ks:
            for n in self.durations:
                r = self.reports[(k, n)]
                rows.append(dict(k=k, N=n, normalization="annual", mean=r.annual_return, std=r.yearly_std, n_trades=r.n_trades))
                rows.append(dict(k=k, N=n, normalization="per_trade", mean=r.per_trade_return, std=r.profit_std, n_trades=r.n_trades))
        return rows


def grid_run(
    pair: AlignedPair,
    ks: Sequence[float] = DEFAULT_KS,
    durations: Sequence[int] = DEFAULT_DURATIONS,
    notional_per_leg: float = 100.0,
    signal_component=Component.DD,
    executor=None,
) -> GridResult:
    """Run every (k, N) cell. ``executor`` (a ``concurrent.futures`` executor) is optional."""
    ks, durations = tuple(ks), tuple(durations)
    if not ks or not durations:
        raise ValidationError("grid needs at least one threshold and one duration")
    component = Component.parse(signal_component)
    x = _spread_values(pair, component)
    configs = [StrategyConfig(k, n, notional_per_leg, component) for k in ks for n in durations]
    signals = {k: generate_signals(x, k) for k in ks}

    def cell(cfg):
        return _report(cfg, signals[cfg.entry_threshold_k], pair)

    results = executor.map(cell, configs) if executor is not None else map(cell, configs)
    reports = {(c.entry_threshold_k, c.duration_n): r for c, r in zip(configs, results)}
    return GridResult(ks, durations, reports)
