"""Intraday/overnight return decomposition, OU spread fitting and
threshold pairs-trading backtests for ADR-SPY style pairs."""

__version__ = "0.1.0"

from .errors import AdrPairsError, EvaluationError, ParseError, TransportError, ValidationError
from .marketdata import AlignedPair, Bar, CsvSchema, PriceSeries, adjust, align, fetch_csv, parse_csv, serialize
from .returns import (
    Component,
    QDiagnostics,
    QQData,
    ReturnSeries,
    ReturnStats,
    SpreadSeries,
    compute_returns,
    correlation,
    q_diagnostics,
    qq_data,
    spread,
    summary_stats,
)
from .ou import (
    FitResult,
    OUParams,
    avg_log_likelihood,
    fit_mle,
    fit_yearly,
    simulate,
    simulate_refit,
    transition_params,
)
from .backtest import (
    BacktestReport,
    GridResult,
    StrategyConfig,
    Trade,
    generate_signals,
    grid_run,
    run_strategy,
)
