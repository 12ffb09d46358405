"""Intraday / overnight / daily returns and the statistics built on them.

All returns are simple returns. For an N-day adjusted series the three
components share the index set of days 1..N-1, so ``values[j]`` is the
return realised on price day ``j + 1``:

    ID(j) = close[j+1] / open[j+1] - 1
    ON(j) = open[j+1] / close[j] - 1
    DD(j) = close[j+1] / close[j] - 1
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import date

import numpy as np
from scipy.stats import norm

from .errors import ValidationError
from .marketdata import PriceSeries

__all__ = [
    "Component",
    "ReturnSeries",
    "SpreadSeries",
    "ReturnStats",
    "QDiagnostics",
    "QQData",
    "compute_returns",
    "summary_stats",
    "correlation",
    "spread",
    "q_diagnostics",
    "qq_data",
    "DEFAULT_BINS",
]

DEFAULT_BINS = 50


class Component(str, enum.Enum):
    ON = "ON"
    ID = "ID"
    DD = "DD"

    @classmethod
    def parse(cls, value) -> "Component":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValidationError(f"unknown return component {value!r} (expected ON, ID or DD)") from None


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    component: Component
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "component", Component.parse(self.component))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", _readonly(self.values))
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValidationError("return series must be a non-empty 1-D sequence")
        if len(self.values) != len(self.dates):
            raise ValidationError(f"{len(self.values)} values but {len(self.dates)} dates")
        if not np.all(self.values > -1.0):
            raise ValidationError("simple returns must exceed -1")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class SpreadSeries:
    """A return spread, or any other scalar series handed to the OU fitter.

    ``dates`` and ``component`` may be ``None`` for synthetic paths.
    """

    values: np.ndarray
    dates: tuple[date, ...] | None = None
    component: Component | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValidationError("spread series must be a non-empty 1-D sequence")
        if self.dates is not None:
            object.__setattr__(self, "dates", tuple(self.dates))
            if len(self.dates) != len(self.values):
                raise ValidationError(f"{len(self.values)} values but {len(self.dates)} dates")
        if self.component is not None:
            object.__setattr__(self, "component", Component.parse(self.component))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ReturnStats:
    mean: float
    std: float
    n: int


@dataclass(frozen=True, eq=False)
class QDiagnostics:
    q_values: np.ndarray
    q_bar: float | None  # None when every day is excluded
    excluded_days: int
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def total_days(self) -> int:
        return len(self.q_values) + self.excluded_days


@dataclass(frozen=True, eq=False)
class QQData:
    theoretical: np.ndarray
    empirical: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.theoretical.tolist(), self.empirical.tolist()))


def compute_returns(series: PriceSeries, component) -> ReturnSeries:
    component = Component.parse(component)
    if len(series) < 2:
        raise ValidationError(f"{series.ticker or 'series'}: need at least 2 days, got {len(series)}")
    if not series.is_adjusted:
        raise ValidationError(f"{series.ticker or 'series'}: adjust() the series before computing returns")
    o, c = series.opens, series.closes
    if component is Component.ID:
        v = (c[1:] - o[1:]) / o[1:]
    elif component is Component.ON:
        v = (o[1:] - c[:-1]) / c[:-1]
    else:
        v = (c[1:] - c[:-1]) / c[:-1]
    return ReturnSeries(component, series.dates[1:], v)


def summary_stats(r) -> ReturnStats:
    """Sample mean and (n-1) standard deviation."""
    x = np.asarray(getattr(r, "values", r), dtype=float)
    n = len(x)
    if n < 2:
        raise ValidationError(f"summary statistics need n >= 2, got {n}")
    # shifted by the first value so a constant series gives mean == value, std == 0 exactly
    d = x - x[0]
    dbar = math.fsum(d) / n
    mean = float(x[0] + dbar)
    std = math.sqrt(math.fsum((d - dbar) ** 2) / (n - 1))
    return ReturnStats(mean, std, n)


def _check_same_index(a, b):
    if len(a) != len(b) or a.dates != b.dates:
        raise ValidationError("series must share the same dates")
    if a.component != b.component:
        raise ValidationError(f"component mismatch: {a.component} vs {b.component}")


def correlation(a: ReturnSeries, b: ReturnSeries) -> float:
    _check_same_index(a, b)
    if len(a) < 2:
        raise ValidationError("correlation needs n >= 2")
    x = a.values - a.values[0]
    y = b.values - b.values[0]
    x = x - x.mean()
    y = y - y.mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise ValidationError("correlation undefined for a constant series")
    rho = float(x @ y) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def spread(adr: ReturnSeries, spy: ReturnSeries) -> SpreadSeries:
    """Elementwise ``adr - spy`` for a single component."""
    _check_same_index(adr, spy)
    return SpreadSeries(adr.values - spy.values, adr.dates, adr.component)


def q_diagnostics(on: ReturnSeries, id: ReturnSeries, bins: int = DEFAULT_BINS) -> QDiagnostics:
    """Daily overnight share of squared return, its mean and a histogram on [0, 1].

    Days where both components are exactly zero are excluded and counted.
    The last histogram bin is closed on the right.
    """
    if len(on) != len(id) or on.dates != id.dates:
        raise ValidationError("overnight and intraday series must share the same dates")
    if int(bins) != bins or bins < 1:
        raise ValidationError(f"bins must be a positive integer, got {bins!r}")
    on2 = on.values**2
    den = id.values**2 + on2
    keep = den > 0
    q = _readonly(on2[keep] / den[keep])
    counts, edges = np.histogram(q, bins=int(bins), range=(0.0, 1.0))
    q_bar = float(q.mean()) if len(q) else None
    return QDiagnostics(q, q_bar, int((~keep).sum()), _readonly(edges), counts)


def qq_data(r) -> QQData:
    """Standardised order statistics against normal quantiles at (k - 0.5)/n."""
    x = np.asarray(getattr(r, "values", r), dtype=float)
    n = len(x)
    if n < 3:
        raise ValidationError(f"QQ data needs n >= 3, got {n}")
    stats = summary_stats(x)
    if stats.std == 0.0:
        raise ValidationError("QQ data undefined for a constant series")
    empirical = np.sort((x - stats.mean) / stats.std)
    theoretical = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return QQData(_readonly(theoretical), _readonly(empirical))
