"""JSON and flat-CSV renderings of analysis results.

Every renderer returns text; the CLI writes exactly these strings, so a
library caller can reproduce any CLI output byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .backtest import BacktestReport, GridResult
from .ou import FitResult
from .returns import QDiagnostics, QQData, ReturnStats

FIT_COLUMNS = ["block", "year", "component", "theta", "sigma", "mu", "avg_ll", "n", "start", "end", "dt", "converged"]
SCATTER_COLUMNS = ["k", "N", "normalization", "mean", "std", "n_trades"]
TRADE_COLUMNS = ["entry_index", "exit_index", "entry_date", "exit_date", "alpha", "beta", "profit"]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, date):
        return obj.isoformat()
    return obj


def to_json(obj) -> str:
    """Deterministic JSON: sorted keys, NaN/inf mapped to null, trailing newline."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return out.getvalue()


def stats_dict(stats: ReturnStats) -> dict:
    return {"mean": stats.mean, "std": stats.std, "n": stats.n}


def qdiag_dict(q: QDiagnostics) -> dict:
    return {
        "q_bar": q.q_bar,
        "n_included": len(q.q_values),
        "excluded_days": q.excluded_days,
        "bin_edges": q.bin_edges,
        "counts": q.counts,
    }


def histogram_rows(q: QDiagnostics, **extra) -> list[dict]:
    edges = q.bin_edges
    return [
        dict(extra, bin=i, lo=float(edges[i]), hi=float(edges[i + 1]), count=int(c))
        for i, c in enumerate(q.counts)
    ]


def qq_rows(qq: QQData, **extra) -> list[dict]:
    return [
        dict(extra, k=i + 1, theoretical=t, empirical=e)
        for i, (t, e) in enumerate(qq.points)
    ]


def fit_row(fit: FitResult, *, block: str = "empirical", year: int | None = None, component=None) -> dict:
    row = fit.to_dict()
    row.update(block=block, year=year, component=getattr(component, "value", component))
    return row


def trade_rows(report: BacktestReport) -> list[dict]:
    return [
        dict(
            entry_index=t.entry_index,
            exit_index=t.exit_index,
            entry_date=t.entry_date,
            exit_date=t.exit_date,
            alpha=t.alpha,
            beta=t.beta,
            profit=t.profit,
        )
        for t in report.trades
    ]


def grid_json(grid: GridResult) -> str:
    cells = [grid[(k, n)].to_dict() for k in grid.ks for n in grid.durations]
    return to_json({"ks": grid.ks, "durations": grid.durations, "cells": cells})


def scatter_csv(grid: GridResult) -> str:
    return to_csv(grid.scatter_rows(), SCATTER_COLUMNS)
