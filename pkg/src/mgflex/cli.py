"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timedelta
from pathlib import Path

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .dispatch import DispatchError, mpc_step, solve_ed, state_from_mapping
from .flexband import TargetProfile, make_data_package, package_from_dict, range_efficiency
from .ingest import IngestError, load_series, to_forecast
from .model import AlphaParams, HorizonSpec, interval_costs

log = logging.getLogger("mgflex")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2
REPORT_COLUMNS = ("test", "power_range_size", "cost_range_size", "range_efficiency")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _err(msg: str) -> None:
    print(f"mgflex: {msg}", file=sys.stderr)


def _alpha_from_flags(args) -> AlphaParams | None:
    flags = (args.alpha_g, args.alpha_s, args.alpha_wt)
    if all(f is None for f in flags):
        return None
    return AlphaParams.scalar(*(f or 0.0 for f in flags))


def _load_scenario(args) -> ScenarioConfig:
    sc = load_config(args.config)
    if args.horizon is not None or args.dt is not None:
        h = sc.microgrid.horizon
        try:
            horizon = HorizonSpec(args.dt if args.dt is not None else h.dt_hours,
                                  args.horizon if args.horizon is not None else h.n_intervals)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        sc.microgrid = replace(sc.microgrid, horizon=horizon)
    alpha = _alpha_from_flags(args)
    if alpha is not None:
        sc.alphas = [alpha]
    return sc


def _forecast(sc: ScenarioConfig, start: datetime, n: int):
    tables = [load_series(p) for p in sc.series_paths]
    return to_forecast(sc.microgrid, tables, start, n, sc.horizon.dt_hours, sc.sell_ratio)


def _wide_row(sc, pkg, committed, window, k) -> dict:
    mg = sc.microgrid
    row = {
        "interval": k,
        "interval_start": pkg.interval_start.isoformat() if pkg.interval_start else "",
        "test": pkg.test if pkg.test is not None else "",
        "target_kw": pkg.target_kw,
        "lower_kw": pkg.range.lower_kw,
        "upper_kw": pkg.range.upper_kw,
        "cost_target": pkg.range.cost_at_target,
        "cost_lower": pkg.range.cost_at_lower,
        "cost_upper": pkg.range.cost_at_upper,
        "load_kw": float(window.demand_kw[0]),
        "buy_price": float(window.buy_price[0]),
        "sell_price": float(window.sell_price[0]),
        "buy_kw": committed.buy_kw,
        "sell_kw": committed.sell_kw,
        "interval_cost": float(sum(interval_costs(mg, committed, float(window.buy_price[0]),
                                                  float(window.sell_price[0]), window.dt_hours))),
    }
    for g in mg.dgs:
        row[f"{g.name}_kw"] = committed.dg[g.name].output_kw
        row[f"{g.name}_on"] = committed.dg[g.name].on
    for b in mg.bess:
        d = committed.bess[b.name]
        row[f"{b.name}_charge_kw"] = d.charge_kw
        row[f"{b.name}_discharge_kw"] = d.discharge_kw
        row[f"{b.name}_soc"] = d.soc
    for w in mg.wts:
        row[f"{w.name}_kw"] = committed.wt[w.name]
    for p in mg.pvs:
        row[f"{p.name}_kw"] = committed.pv[p.name]
    return row


def cmd_run(args) -> int:
    try:
        sc = _load_scenario(args)
        h = sc.horizon.n_intervals
        n = sc.window_intervals
        full = _forecast(sc, sc.window_start, n + h - 1)
    except (ConfigError, IngestError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    out_dir = Path(args.out) if args.out else (sc.output_dir or Path("out") / sc.name)
    mg = sc.microgrid
    state = sc.initial_state
    sweep = len(sc.alphas) > 1
    packages, rows = [], []
    total_cost = 0.0
    for k in range(n):
        window = full.window(k, h)
        when = window.start.isoformat() if window.start else str(k)
        try:
            sol, committed, next_state = mpc_step(mg, state, window)
            first = window.window(0, 1)
            for i, alpha in enumerate(sc.alphas):
                pkg = make_data_package(mg, state, first, sol, alpha, test=i if sweep else None)
                packages.append(pkg)
                rows.append(_wide_row(sc, pkg, committed, window, k))
        except DispatchError as exc:
            _err(f"interval {k} ({when}): solver failure: {exc}")
            return EXIT_SOLVER
        total_cost += float(sum(sol.costs[0]))
        state = next_state
        log.debug("interval %d (%s): trade %.3f kW", k, when, committed.trade_kw)

    out_dir.mkdir(parents=True, exist_ok=True)
    pkg_path = out_dir / "packages.jsonl"
    with pkg_path.open("w", encoding="utf-8", newline="\n") as fh:
        for pkg in packages:
            fh.write(pkg.to_json() + "\n")
    csv_path = out_dir / "dispatch.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(v) for k, v in r.items()})
    if not args.quiet:
        print(f"scenario: {sc.name}")
        print(f"intervals: {n}  horizon: {h} x {sc.horizon.dt_hours} h  alpha sets: {len(sc.alphas)}")
        print(f"total cost: {total_cost:.4f}")
        print("infeasible intervals: 0")
        print(f"packages: {pkg_path}")
        print(f"table: {csv_path}")
    return EXIT_OK


def _resolve_interval(sc: ScenarioConfig, raw: str | None) -> datetime:
    if raw is None:
        return sc.window_start
    try:
        k = int(raw)
    except ValueError:
        return datetime.fromisoformat(raw)
    return sc.window_start + timedelta(hours=sc.horizon.dt_hours * k)


def cmd_flexband(args) -> int:
    try:
        sc = _load_scenario(args)
        if args.state:
            sc.initial_state = state_from_mapping(json.loads(Path(args.state).read_text(encoding="utf-8")))
            sc.initial_state.validate(sc.microgrid)
        start = _resolve_interval(sc, args.interval)
        if args.test is not None:
            if not 0 <= args.test < len(sc.alphas):
                raise ConfigError(f"--test {args.test} outside the {len(sc.alphas)} configured alpha rows")
            alpha = sc.alphas[args.test]
        elif len(sc.alphas) == 1:
            alpha = sc.alphas[0]
        else:
            raise ConfigError("config holds an alpha sweep; pick a row with --test or pass --alpha-* flags")
        n = 1 if sc.targets is not None else sc.horizon.n_intervals
        forecast = _forecast(sc, start, n)
    except (ConfigError, IngestError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        if sc.targets is not None:
            targets = sc.targets
        else:
            targets = TargetProfile.from_dispatch(solve_ed(sc.microgrid, sc.initial_state, forecast))
        pkg = make_data_package(sc.microgrid, sc.initial_state, forecast.window(0, 1), targets, alpha,
                                test=args.test)
    except DispatchError as exc:
        _err(f"interval {start.isoformat()}: solver failure: {exc}")
        return EXIT_SOLVER
    except (KeyError, ValueError) as exc:
        _err(f"interval {start.isoformat()}: invalid targets: {exc}")
        return EXIT_CONFIG
    print(pkg.to_json())
    return EXIT_OK


def report_rows(lines) -> list[dict]:
    """Parse package lines into report rows; raises ``ValueError`` naming the line."""
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = package_from_dict(json.loads(line))
        except (json.JSONDecodeError, ValueError, TypeError, AttributeError) as exc:
            raise ValueError(f"line {lineno}: malformed package: {exc}") from None
        power = rec["upper_kw"] - rec["lower_kw"]
        cost = abs(rec["cost_upper"] - rec["cost_lower"])
        rows.append({
            "test": rec.get("test", lineno),
            "power_range_size": power,
            "cost_range_size": cost,
            "range_efficiency": range_efficiency((power, cost)),
            "interval_start": rec.get("interval_start"),
            "target_kw": rec["target_kw"],
            "lower_kw": rec["lower_kw"],
            "upper_kw": rec["upper_kw"],
        })
    return rows


def render_report_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def cmd_report(args) -> int:
    path = Path(args.packages)
    try:
        with path.open(encoding="utf-8") as fh:
            rows = report_rows(fh)
    except OSError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ValueError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    text = render_report_csv(rows)
    sys.stdout.write(text)
    if args.out:
        from .plotting import plot_range_report, plot_trading_band

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(text, encoding="utf-8")
        if rows:
            plot_range_report(rows, out / "range_report.png", title=args.title or path.stem)
            starts = sorted({r["interval_start"] for r in rows if r["interval_start"]})
            if len(starts) > 1:
                # one band per interval: the widest range offered there
                by_start = {}
                for r in rows:
                    s = r["interval_start"]
                    if s and (s not in by_start or
                              r["power_range_size"] > by_start[s]["power_range_size"]):
                        by_start[s] = r
                pts = [by_start[s] for s in starts]
                plot_trading_band([datetime.fromisoformat(s) for s in starts], [p["target_kw"] for p in pts],
                                  [p["lower_kw"] for p in pts], [p["upper_kw"] for p in pts],
                                  out / "trading_band.png")
        if not args.quiet:
            print(f"wrote {out / 'report.csv'}", file=sys.stderr)
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--horizon", type=int, help="intervals per dispatch horizon")
    p.add_argument("--dt", type=float, help="interval length in hours")
    p.add_argument("--alpha-g", type=float, help="release fraction for diesel generators")
    p.add_argument("--alpha-s", type=float, help="release fraction for batteries")
    p.add_argument("--alpha-wt", type=float, help="release fraction for wind turbines")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgflex", description="Microgrid dispatch with flexible trading power")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="rolling dispatch with a data package per interval")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("flexband", help="data package for a single interval")
    _common(p)
    p.add_argument("--state", help="JSON file with the system state at the interval start")
    p.add_argument("--interval", help="interval start (ISO-8601) or index from the window start")
    p.add_argument("--test", type=int, help="row of the configured alpha sweep")
    p.set_defaults(func=cmd_flexband)

    p = sub.add_parser("report", help="range-efficiency table from a package file")
    p.add_argument("packages", help="JSON-lines package file")
    p.add_argument("--out", help="also write report.csv and figures here")
    p.add_argument("--title", help="figure title")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
