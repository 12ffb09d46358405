from __future__ import annotations

import http.server
import os
import threading
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

from adrpairs.errors import ParseError
from adrpairs.marketdata import AlignedPair, CsvSchema, PriceSeries, adjust, parse_csv


def business_days(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def random_series(rng, n, ticker="T", start=date(2010, 1, 4), factors=False, vol=0.02) -> PriceSeries:
    """Geometric random walk with separate overnight and intraday shocks."""
    closes = np.empty(n)
    opens = np.empty(n)
    c = 50.0 * np.exp(rng.normal())
    for i in range(n):
        o = c * np.exp(vol * 0.7 * rng.standard_normal())
        c = o * np.exp(vol * rng.standard_normal())
        opens[i], closes[i] = o, c
    adj = rng.uniform(0.3, 1.0, n) if factors else None
    return PriceSeries.from_arrays(ticker, business_days(start, n), opens, closes, adj)


def random_pair(rng, n, start=date(2010, 1, 4)) -> AlignedPair:
    return AlignedPair(random_series(rng, n, "ADR", start), random_series(rng, n, "SPY", start))


# --- user-supplied market data -------------------------------------------------

DATA_DIR = os.environ.get("ADRPAIRS_DATA_DIR")
DATA_WINDOW = (date(2004, 6, 15), date(2014, 6, 13))
_YAHOO = CsvSchema(date="Date", open="Open", close="Close", adj_close="Adj Close")
needs_data = pytest.mark.skipif(
    not DATA_DIR, reason="ADRPAIRS_DATA_DIR not set; 2004-2014 daily CSVs are user-supplied"
)


def load_user_series(ticker) -> PriceSeries:
    """Adjusted series for ``ticker`` from ADRPAIRS_DATA_DIR, clipped to the study window."""
    path = Path(DATA_DIR) / f"{ticker}.csv"
    if not path.exists():
        pytest.skip(f"{path} not found")
    raw = path.read_bytes()
    try:
        s = parse_csv(raw, ticker=ticker)
    except ParseError:
        s = parse_csv(raw, _YAHOO, ticker=ticker)
    bars = tuple(b for b in adjust(s).bars if DATA_WINDOW[0] <= b.date <= DATA_WINDOW[1])
    return PriceSeries(ticker, bars)


@pytest.fixture
def rng():
    return np.random.default_rng(20160615)


class _Handler(http.server.BaseHTTPRequestHandler):
    routes: dict = {}

    def do_GET(self):
        status, body = self.routes.get(self.path, (404, b"not found"))
        self.send_response(status)
        self.send_header("Content-Type", "text/csv")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def csv_server():
    """Local HTTP server; tests register ``routes[path] = (status, body)``."""
    routes: dict = {}
    handler = type("H", (_Handler,), {"routes": routes})
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, routes
    server.shutdown()
    server.server_close()


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []
_ACCEPTANCE_NAMES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    name = _ACCEPTANCE_NAMES.get(report.nodeid)
    if name is None:
        return
    status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    detail = ""
    if report.skipped and isinstance(report.longrepr, tuple):
        detail = report.longrepr[2]
    ACCEPTANCE_RESULTS.append((status, name, detail))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _ACCEPTANCE_NAMES[item.nodeid] = m.args[0]


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): an exit criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in ACCEPTANCE_RESULTS:
        line = f"{status:4s}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
