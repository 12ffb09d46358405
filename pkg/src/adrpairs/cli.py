"""adrpairs command line.

Usage:
    adrpairs stats PRICES.csv [--components ON,ID,DD] [--bins 50]
    adrpairs qratio PRICES.csv [--bins 50]
    adrpairs qq PRICES.csv [--components ON,ID]
    adrpairs fit --adr TSM.csv --spy SPY.csv [--components ON,ID,DD] [--yearly] [--refit]
    adrpairs simulate --theta 0.001 --mu 3 --sigma 0.03 --n 2516 [--x0 0]
    adrpairs backtest --adr CHL.csv --spy SPY.csv --k=-0.5% --duration 3
    adrpairs grid --adr CHL.csv --spy SPY.csv [--ks=0%,-0.5%,-1%,-1.5%] [--durations 1,2,3,4,5]
    adrpairs fetch --ticker SPY --start 2004-06-15 --end 2014-06-13 [--url-template URL]

Common flags (accepted by every subcommand): --seed, --out, --threads,
--format=json|csv|both, --columns date=Date,open=Open,...

Each run writes into ``<out>/<command>-<timestamp>-<hash>/`` together with a
``manifest.json`` that records the argv needed to reproduce it.

Exit codes: 0 success (possibly with warnings), 1 usage error, 2 input or
parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from . import reporting as rep
from .backtest import DEFAULT_DURATIONS, DEFAULT_KS, StrategyConfig, grid_run, run_strategy
from .errors import AdrPairsError, EvaluationError
from .marketdata import CsvSchema, adjust, align, fetch_csv, parse_csv, serialize
from .ou import OUParams, fit_mle, fit_yearly, simulate, simulate_refit
from .returns import (
    DEFAULT_BINS,
    Component,
    compute_returns,
    q_diagnostics,
    qq_data,
    spread,
    summary_stats,
)

log = logging.getLogger("adrpairs")

URL_TEMPLATE_ENV = "ADRPAIRS_URL_TEMPLATE"

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    inputs: list[str]
    params: dict
    seed: int
    out: str
    version: str = __version__
    argv: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return rep.to_json(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        import json

        return cls(**json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:8]


# --- argument parsing --------------------------------------------------------


def parse_fraction(text: str) -> float:
    """'-0.5%' -> -0.005, '-0.005' -> -0.005."""
    s = text.strip()
    try:
        if s.endswith("%"):
            return float(Decimal(s[:-1]) / 100)
        return float(Decimal(s))
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number or percentage: {text!r}") from None


def _list_of(convert):
    def parse(text: str):
        items = [t for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return [convert(t) for t in items]

    return parse


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _component(text: str) -> Component:
    try:
        return Component(text.strip().upper())
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown component {text!r}") from None


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _schema(text: str) -> dict:
    mapping = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=column, got {item!r}")
        mapping[key.strip()] = value.strip() or None
    return mapping


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--seed", type=int, default=0, help="root RNG seed (default 0)")
    g.add_argument("--out", default="runs", help="output root directory (default ./runs)")
    g.add_argument("--threads", type=_positive_int, default=1, help="max worker threads")
    g.add_argument("--format", choices=("json", "csv", "both"), default="both")
    g.add_argument("--columns", type=_schema, default=None, help="CSV column mapping, e.g. date=Date,open=Open,close=Close,adj_close=Adj Close")

    p = _Parser(prog="adrpairs", description="ADR/SPY return decomposition, OU fitting and pairs backtests.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", parents=[common], help="return statistics and q-ratio per component")
    s.add_argument("prices")
    s.add_argument("--components", type=_list_of(_component), default=list(Component))
    s.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS)

    s = sub.add_parser("qratio", parents=[common], help="squared-returns ratio diagnostics")
    s.add_argument("prices")
    s.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS)

    s = sub.add_parser("qq", parents=[common], help="normal QQ points")
    s.add_argument("prices")
    s.add_argument("--components", type=_list_of(_component), default=[Component.ON, Component.ID])

    s = sub.add_parser("fit", parents=[common], help="OU maximum-likelihood fit of ADR-SPY spreads")
    s.add_argument("--adr", required=True)
    s.add_argument("--spy", required=True)
    s.add_argument("--components", type=_list_of(_component), default=list(Component))
    s.add_argument("--yearly", action="store_true", help="fit each calendar year separately")
    s.add_argument("--refit", action="store_true", help="also simulate from each fit and re-estimate")
    s.add_argument("--dt", type=float, default=1.0)

    s = sub.add_parser("simulate", parents=[common], help="simulate an OU path")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--x0", type=float, default=None, help="initial value (default theta)")
    s.add_argument("--dt", type=float, default=1.0)

    s = sub.add_parser("backtest", parents=[common], help="single (k, N) pairs-trading backtest")
    s.add_argument("--adr", required=True)
    s.add_argument("--spy", required=True)
    s.add_argument("--k", type=parse_fraction, required=True, help="entry threshold, e.g. --k=-0.5%%")
    s.add_argument("--duration", type=_positive_int, required=True)
    s.add_argument("--notional", type=float, default=100.0)
    s.add_argument("--component", type=_component, default=Component.DD)

    s = sub.add_parser("grid", parents=[common], help="(k, N) grid of backtests")
    s.add_argument("--adr", required=True)
    s.add_argument("--spy", required=True)
    s.add_argument("--ks", type=_list_of(parse_fraction), default=list(DEFAULT_KS))
    s.add_argument("--durations", type=_list_of(_positive_int), default=list(DEFAULT_DURATIONS))
    s.add_argument("--notional", type=float, default=100.0)
    s.add_argument("--component", type=_component, default=Component.DD)

    s = sub.add_parser("fetch", parents=[common], help=f"download a price CSV (template from --url-template or ${URL_TEMPLATE_ENV})")
    s.add_argument("--ticker", required=True)
    s.add_argument("--start", type=_iso_date, required=True)
    s.add_argument("--end", type=_iso_date, required=True)
    s.add_argument("--url-template", default=None)
    return p


# --- commands ------------------------------------------------------------------
# Each returns {relative filename: text}; main() does all writing.


def _load(path: str, args) -> "PriceSeries":  # noqa: F821
    schema = CsvSchema.from_mapping(args.columns) if args.columns else None
    with open(path, "rb") as fh:
        return adjust(parse_csv(fh, schema, ticker=Path(path).stem))


def _emit(fmt: str, name: str, json_text: str | None, csv_text: str | None) -> dict[str, str]:
    files = {}
    if fmt in ("json", "both") and json_text is not None:
        files[f"{name}.json"] = json_text
    if fmt in ("csv", "both") and csv_text is not None:
        files[f"{name}.csv"] = csv_text
    return files


def cmd_stats(args) -> dict[str, str]:
    series = _load(args.prices, args)
    on = compute_returns(series, Component.ON)
    id_ = compute_returns(series, Component.ID)
    q = q_diagnostics(on, id_, args.bins)
    doc = {"ticker": series.ticker, "n_days": len(series), "components": {}, "q": rep.qdiag_dict(q)}
    rows = []
    for c in args.components:
        st = summary_stats(compute_returns(series, c))
        doc["components"][c.value] = rep.stats_dict(st)
        rows.append(dict(ticker=series.ticker, component=c.value, mean=st.mean, std=st.std, n=st.n))
    rows.append(dict(ticker=series.ticker, component="q_bar", mean=q.q_bar, n=len(q.q_values), excluded=q.excluded_days))
    files = _emit(args.format, "stats", rep.to_json(doc), rep.to_csv(rows, ["ticker", "component", "mean", "std", "n", "excluded"]))
    if args.format in ("csv", "both"):
        files["qhist.csv"] = rep.to_csv(rep.histogram_rows(q), ["bin", "lo", "hi", "count"])
    return files


def cmd_qratio(args) -> dict[str, str]:
    series = _load(args.prices, args)
    q = q_diagnostics(compute_returns(series, "ON"), compute_returns(series, "ID"), args.bins)
    doc = dict(rep.qdiag_dict(q), ticker=series.ticker, q_values=q.q_values)
    return _emit(args.format, "qratio", rep.to_json(doc), rep.to_csv(rep.histogram_rows(q), ["bin", "lo", "hi", "count"]))


def cmd_qq(args) -> dict[str, str]:
    series = _load(args.prices, args)
    rows, doc = [], {}
    for c in args.components:
        qq = qq_data(compute_returns(series, c))
        rows.extend(rep.qq_rows(qq, component=c.value))
        doc[c.value] = {"theoretical": qq.theoretical, "empirical": qq.empirical}
    return _emit(args.format, "qq", rep.to_json(doc), rep.to_csv(rows, ["component", "k", "theoretical", "empirical"]))


def _spread_for(pair, component):
    return spread(compute_returns(pair.left, component), compute_returns(pair.right, component))


def cmd_fit(args) -> dict[str, str]:
    pair = align(_load(args.adr, args), _load(args.spy, args))
    tasks = []
    for c in args.components:
        x = _spread_for(pair, c)
        if args.yearly:
            tasks.extend((c, year, fit) for year, fit in fit_yearly(x, args.dt))
        else:
            tasks.append((c, None, fit_mle(x, args.dt)))

    rows = [rep.fit_row(fit, year=year, component=c) for c, year, fit in tasks]
    if args.refit:

        def refit(item):
            i, (c, year, fit) = item
            if not fit.converged:
                return None
            # per-task seeds derived from the root seed
            return rep.fit_row(simulate_refit(fit, args.seed + i), block="simulated", year=year, component=c)

        with ThreadPoolExecutor(args.threads) as ex:
            rows.extend(r for r in ex.map(refit, enumerate(tasks)) if r is not None)

    for row in rows:
        if not row["converged"]:
            log.warning("%s %s %s: fit did not converge", row["block"], row["component"], row["year"] or "")
    return _emit(args.format, "fit", rep.to_json(rows), rep.to_csv(rows, rep.FIT_COLUMNS))


def cmd_simulate(args) -> dict[str, str]:
    params = OUParams(args.theta, args.mu, args.sigma)
    x0 = params.theta if args.x0 is None else args.x0
    path = simulate(params, x0, args.n, args.dt, args.seed)
    rows = [dict(step=i + 1, value=v) for i, v in enumerate(path.values.tolist())]
    doc = {"params": asdict(params), "x0": x0, "dt": args.dt, "seed": args.seed, "values": path.values}
    return _emit(args.format, "path", rep.to_json(doc), rep.to_csv(rows, ["step", "value"]))


def cmd_backtest(args) -> dict[str, str]:
    pair = align(_load(args.adr, args), _load(args.spy, args))
    cfg = StrategyConfig(args.k, args.duration, args.notional, args.component)
    report = run_strategy(pair, cfg)
    return _emit(args.format, "report", rep.to_json(report.to_dict()), rep.to_csv(rep.trade_rows(report), rep.TRADE_COLUMNS))


def cmd_grid(args) -> dict[str, str]:
    pair = align(_load(args.adr, args), _load(args.spy, args))
    with ThreadPoolExecutor(args.threads) as ex:
        grid = grid_run(pair, args.ks, args.durations, args.notional, args.component, executor=ex)
    files = {}
    if args.format in ("csv", "both"):
        files["scatter.csv"] = rep.scatter_csv(grid)
    if args.format in ("json", "both"):
        files["grid.json"] = rep.grid_json(grid)
        for (k, n), r in grid.reports.items():
            files[f"cells/k={k!r}_N={n}.json"] = rep.to_json(r.to_dict())
    return files


def cmd_fetch(args) -> dict[str, str]:
    template = args.url_template or os.environ.get(URL_TEMPLATE_ENV)
    if not template:
        raise UsageError(f"no URL template: pass --url-template or set ${URL_TEMPLATE_ENV}")
    series = fetch_csv(template, args.ticker, (args.start, args.end))
    return {f"{args.ticker}.csv": serialize(series)}


COMMANDS = {
    "stats": cmd_stats,
    "qratio": cmd_qratio,
    "qq": cmd_qq,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "backtest": cmd_backtest,
    "grid": cmd_grid,
    "fetch": cmd_fetch,
}

_GLOBAL_KEYS = {"command", "seed", "out", "threads"}
_INPUT_KEYS = ("prices", "adr", "spy")


def _manifest(args, argv) -> RunManifest:
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in _GLOBAL_KEYS or key in _INPUT_KEYS:
            continue
        if isinstance(value, list):
            value = [getattr(v, "value", v) for v in value]
        params[key] = getattr(value, "value", value)
    inputs = [getattr(args, k) for k in _INPUT_KEYS if getattr(args, k, None)]
    return RunManifest(args.command, inputs, params, args.seed, args.out, argv=list(argv))


def run(argv: list[str]) -> tuple[Path, dict[str, str]]:
    """Parse ``argv``, execute, write outputs; returns the run directory and files written."""
    args = build_parser().parse_args(argv)
    files = COMMANDS[args.command](args)
    manifest = _manifest(args, argv)
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S%f")
    run_dir = Path(args.out) / f"{args.command}-{stamp}-{manifest.digest()}"
    run_dir.mkdir(parents=True, exist_ok=False)
    for name, text in sorted(files.items()):
        path = run_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    (run_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return run_dir, files


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        run_dir, files = run(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, errors exit 1
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"adrpairs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, ArithmeticError) as exc:
        print(f"adrpairs: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AdrPairsError, OSError) as exc:
        print(f"adrpairs: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(run_dir)
    for name in sorted(files):
        print(f"  {name}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
