"""Daily price ingestion, split/dividend adjustment and pair alignment.

The canonical CSV layout is ``date,open,close,adj_close`` with ISO-8601
dates. ``serialize`` additionally writes an ``adj_factor`` column so that a
parse/serialize round trip is exact; when both columns are present the
explicit factor wins.
"""

from __future__ import annotations

import csv
import io
import math
import urllib.error
import urllib.request
from dataclasses import dataclass, replace
from datetime import date, datetime
from functools import cached_property
from typing import IO

import numpy as np

from .errors import ParseError, TransportError, ValidationError

__all__ = [
    "Bar",
    "PriceSeries",
    "AlignedPair",
    "CsvSchema",
    "parse_csv",
    "serialize",
    "fetch_csv",
    "adjust",
    "align",
]


@dataclass(frozen=True)
class Bar:
    date: date
    open: float
    close: float
    adj_factor: float = 1.0

    def __post_init__(self):
        for name in ("open", "close", "adj_factor"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{self.date}: {name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class PriceSeries:
    """Date-ordered daily bars for one ticker.

    Array views (``dates``, ``opens``, ``closes``, ``adj_factors``) are built
    lazily and marked read-only.
    """

    ticker: str
    bars: tuple[Bar, ...]

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        if not self.bars:
            raise ValidationError(f"{self.ticker or 'series'}: empty series")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date == prev.date:
                raise ValidationError(f"{self.ticker or 'series'}: duplicate date {cur.date}")
            if cur.date < prev.date:
                raise ValidationError(
                    f"{self.ticker or 'series'}: dates not increasing ({prev.date} then {cur.date})"
                )

    def __len__(self) -> int:
        return len(self.bars)

    @cached_property
    def dates(self) -> tuple[date, ...]:
        return tuple(b.date for b in self.bars)

    @cached_property
    def opens(self) -> np.ndarray:
        return _frozen_array([b.open for b in self.bars])

    @cached_property
    def closes(self) -> np.ndarray:
        return _frozen_array([b.close for b in self.bars])

    @cached_property
    def adj_factors(self) -> np.ndarray:
        return _frozen_array([b.adj_factor for b in self.bars])

    @property
    def is_adjusted(self) -> bool:
        return all(b.adj_factor == 1.0 for b in self.bars)

    @classmethod
    def from_arrays(cls, ticker, dates, opens, closes, adj_factors=None) -> "PriceSeries":
        if adj_factors is None:
            adj_factors = [1.0] * len(dates)
        if not (len(dates) == len(opens) == len(closes) == len(adj_factors)):
            raise ValidationError("from_arrays: length mismatch")
        bars = (
            Bar(d, float(o), float(c), float(f))
            for d, o, c, f in zip(dates, opens, closes, adj_factors)
        )
        return cls(ticker, tuple(bars))


@dataclass(frozen=True)
class AlignedPair:
    left: PriceSeries
    right: PriceSeries

    def __post_init__(self):
        if self.left.dates != self.right.dates:
            raise ValidationError("aligned pair legs must share identical dates")
        if len(self.left) < 2:
            raise ValidationError("aligned pair needs at least 2 common dates")

    @property
    def dates(self) -> tuple[date, ...]:
        return self.left.dates

    def __len__(self) -> int:
        return len(self.left)


def _frozen_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for ``parse_csv``.

    ``adj_close`` and ``adj_factor`` are optional: a column named here but
    absent from the header is treated as not supplied. ``date_format`` is a
    ``strptime`` pattern; ``None`` means ISO-8601.
    """

    date: str = "date"
    open: str = "open"
    close: str = "close"
    adj_close: str | None = "adj_close"
    adj_factor: str | None = "adj_factor"
    date_format: str | None = None

    @classmethod
    def from_mapping(cls, mapping: dict[str, str | None]) -> "CsvSchema":
        unknown = set(mapping) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValidationError(f"unknown schema keys: {sorted(unknown)}")
        return replace(cls(), **mapping)


CANONICAL = CsvSchema()


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray, memoryview)):
        raw = bytes(source)
    elif isinstance(source, str):
        return source
    else:
        raw = source.read()
        if isinstance(raw, str):
            return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not UTF-8: {exc}") from None


def _parse_date(text: str, fmt: str | None, line: int) -> date:
    text = text.strip()
    try:
        if fmt is None:
            # tolerate a trailing time component ("2010-01-04 00:00:00")
            if len(text) > 10 and text[10] in "T ":
                text = text[:10]
            return date.fromisoformat(text)
        return datetime.strptime(text, fmt).date()
    except ValueError:
        raise ParseError(f"line {line}: unparseable date {text!r}") from None


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"line {line}: non-numeric {column} {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"line {line}: non-finite {column} {text!r}")
    return v


def parse_csv(source: bytes | str | IO, schema: CsvSchema | None = None, ticker: str = "") -> PriceSeries:
    """Parse a daily price CSV into a sorted, validated ``PriceSeries``.

    ``source`` may be bytes, a str, or a binary/text file object. Rows may
    arrive in any date order. Errors name the offending line (header is
    line 1).
    """
    schema = schema or CANONICAL
    reader = csv.reader(io.StringIO(_read_text(source)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("missing header row") from None
    col = {name: i for i, name in enumerate(header)}
    for required in (schema.date, schema.open, schema.close):
        if required not in col:
            raise ParseError(f"missing column {required!r} in header {header}")
    i_factor = col.get(schema.adj_factor) if schema.adj_factor else None
    i_adjc = col.get(schema.adj_close) if schema.adj_close else None

    bars = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        d = _parse_date(row[col[schema.date]], schema.date_format, line)
        o = _parse_float(row[col[schema.open]], schema.open, line)
        c = _parse_float(row[col[schema.close]], schema.close, line)
        if o <= 0 or c <= 0:
            raise ValidationError(f"line {line}: nonpositive price (open={o}, close={c})")
        if i_factor is not None:
            f = _parse_float(row[i_factor], schema.adj_factor, line)
        elif i_adjc is not None:
            f = _parse_float(row[i_adjc], schema.adj_close, line) / c
        else:
            f = 1.0
        if f <= 0:
            raise ValidationError(f"line {line}: nonpositive adjustment ({f})")
        bars.append(Bar(d, o, c, f))

    if not bars:
        raise ValidationError(f"{ticker or 'series'}: empty series")
    bars.sort(key=lambda b: b.date)
    for prev, cur in zip(bars, bars[1:]):
        if prev.date == cur.date:
            raise ValidationError(f"{ticker or 'series'}: duplicate date {cur.date}")
    return PriceSeries(ticker, tuple(bars))


def serialize(series: PriceSeries) -> str:
    """Render ``series`` in the canonical layout plus an exact ``adj_factor`` column."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["date", "open", "close", "adj_close", "adj_factor"])
    for b in series.bars:
        w.writerow([b.date.isoformat(), repr(b.open), repr(b.close), repr(b.close * b.adj_factor), repr(b.adj_factor)])
    return out.getvalue()


def fetch_csv(
    url_template: str,
    ticker: str,
    date_range: tuple[date, date],
    schema: CsvSchema | None = None,
    timeout: float = 30.0,
) -> PriceSeries:
    """GET ``url_template`` (placeholders ``{ticker}``, ``{start}``, ``{end}``) and parse the body."""
    start, end = date_range
    try:
        url = url_template.format(ticker=ticker, start=start.isoformat(), end=end.isoformat())
    except (KeyError, IndexError) as exc:
        raise ValidationError(f"bad URL template placeholder: {exc}") from None
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise TransportError(f"GET {url} failed: HTTP {exc.code}") from None
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"GET {url} failed: {exc}") from None
    return parse_csv(body, schema, ticker=ticker)


def adjust(series: PriceSeries) -> PriceSeries:
    """Scale open and close by each bar's factor and reset factors to 1."""
    if series.is_adjusted:
        return series
    bars = tuple(Bar(b.date, b.open * b.adj_factor, b.close * b.adj_factor, 1.0) for b in series.bars)
    return PriceSeries(series.ticker, bars)


def align(a: PriceSeries, b: PriceSeries) -> AlignedPair:
    """Restrict both series to their common dates."""
    common = set(a.dates) & set(b.dates)
    if len(common) < 2:
        raise ValidationError(
            f"{a.ticker or 'left'}/{b.ticker or 'right'}: only {len(common)} common dates, need 2"
        )
    left = a if len(common) == len(a) else PriceSeries(a.ticker, tuple(x for x in a.bars if x.date in common))
    right = b if len(common) == len(b) else PriceSeries(b.ticker, tuple(x for x in b.bars if x.date in common))
    return AlignedPair(left, right)
