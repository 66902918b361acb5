"""Command-line front end: run, sweep, check, presets."""
from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import analysis, engine
from .engine import DivergenceError, Scenario
from .io import (
    EVENTS_FILENAME,
    PLOT_DATA_FILENAME,
    REPORT_FILENAME,
    TRACE_FILENAME,
    read_events_json,
    read_trace_csv,
    write_events_json,
    write_plot_data,
    write_plots,
    write_report_json,
    write_trace_csv,
)
from .scenario import (
    SWEEPABLE,
    ScenarioError,
    apply_override,
    dumps_scenario,
    parse_scenario,
    preset_names,
)

WORKERS_ENV = "RIGIDSIM_WORKERS"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_command(scenario: Scenario, outdir: str, plot: bool = False) -> int:
    """Simulate one scenario and write trace, event log, and verification report."""
    os.makedirs(outdir, exist_ok=True)
    try:
        trace, log = engine.run(scenario)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_trace_csv(trace, os.path.join(outdir, TRACE_FILENAME))
    write_events_json(log, os.path.join(outdir, EVENTS_FILENAME))
    report = analysis.build_report(scenario, trace, log)
    write_report_json(report, os.path.join(outdir, REPORT_FILENAME))
    if plot:
        write_plot_data(scenario, trace, log, os.path.join(outdir, PLOT_DATA_FILENAME))
        write_plots(scenario, trace, log, outdir)
    print(
        f"{scenario.name or scenario.controller}: "
        f"final max|e_k| = {report['convergence']['final_max_abs_error']:.3e}, "
        f"events = {sum(v['count'] for v in report['events'].values()) if report['events'] else 0}, "
        f"lyapunov monotone = {report['lyapunov']['monotone']}"
    )
    return 0


def _sweep_cell(args):
    idx, scenario, outdir = args
    celldir = os.path.join(outdir, f"cell_{idx:03d}")
    os.makedirs(celldir, exist_ok=True)
    try:
        trace, log = engine.run(scenario)
    except DivergenceError as exc:
        return idx, {"status": f"diverged (step {exc.step_index})"}
    write_trace_csv(trace, os.path.join(celldir, TRACE_FILENAME))
    write_events_json(log, os.path.join(celldir, EVENTS_FILENAME))
    try:
        kappa = analysis.fit_decay_rate(trace)
    except ValueError:
        kappa = None
    stats = analysis.inter_event_stats(log) if len(log) else {}
    gaps = [s.min_gap for s in stats.values() if s.min_gap is not None]
    return idx, {
        "status": "ok",
        "kappa": kappa,
        "event_count": len(log),
        "min_gap": min(gaps) if gaps else None,
        "final_error_norm": float(trace.error_norms[-1]),
    }


def sweep_command(
    base: Scenario, grid: dict[str, list[float]], outdir: str, workers: int = 1
) -> list[dict]:
    """Run one cell per grid point and write a deterministic summary table."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ScenarioError("sweep grid must contain at least one value per parameter")
    names = list(grid)
    cells = []
    for combo in itertools.product(*(grid[k] for k in names)):
        s = base
        for param, value in zip(names, combo):
            s = apply_override(s, param, value)  # validates open intervals up front
        cells.append((dict(zip(names, combo)), s))

    os.makedirs(outdir, exist_ok=True)
    jobs = [(idx, s, outdir) for idx, (_, s) in enumerate(cells)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_sweep_cell, jobs))
    else:
        results = dict(map(_sweep_cell, jobs))

    rows = []
    for idx, (combo, _) in enumerate(cells):
        row = {"cell": idx, **combo, **results[idx]}
        rows.append(row)

    import csv

    columns = ["cell", *names, "status", "kappa", "event_count", "min_gap", "final_error_norm"]
    with open(os.path.join(outdir, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row.get(c, "") if row.get(c) is not None else "" for c in columns])
    return rows


def check_command(outdir: str, scenario: Scenario | None = None) -> int:
    """Re-verify an existing run directory; exit nonzero when a check fails."""
    trace = read_trace_csv(
        os.path.join(outdir, TRACE_FILENAME),
        controller=scenario.controller if scenario else "",
    )
    log = read_events_json(os.path.join(outdir, EVENTS_FILENAME))

    failures = []
    v = trace.lyapunov
    max_increase = float(np.diff(v).max()) if v.size > 1 else 0.0
    monotone = max_increase <= 1e-12
    modified = scenario is not None and scenario.controller == "modified-distributed-event"
    print(f"lyapunov monotone: {monotone} (max increase {max_increase:.3e})")
    if not monotone and not modified:
        failures.append("lyapunov")

    for scope in log.scopes():
        times = log.times_for(scope)
        if np.any(np.diff(times) <= 0):
            failures.append(f"event-order[{scope}]")
            print(f"event times for scope {scope} are not strictly increasing: FAIL")

    if scenario is not None:
        report = analysis.build_report(scenario, trace, log)
        write_report_json(report, os.path.join(outdir, REPORT_FILENAME))
        viol = report["trigger_condition"]["max_violation"]
        print(f"trigger condition max violation: {viol:.3e}")
        if viol > 1e-9:
            failures.append("trigger-condition")
        if "zeno" in report:
            z = report["zeno"]
            if scenario.controller == "centralized-event":
                ok = z["printed_ok"] or z["conservative_ok"]
                print(
                    f"zeno bound: min gap {z['min_gap']} vs tau {z['tau_printed']:.3e} "
                    f"(printed) / {z['tau_conservative']:.3e} (conservative): "
                    f"{'ok' if ok else 'FAIL'}"
                )
                if not ok:
                    failures.append("zeno")
            else:
                print(f"zeno per-agent bounds ok: {z['all_bounds_ok']}")
                if not z["all_bounds_ok"]:
                    failures.append("zeno")
        if report["decay"]["kappa_fit"] is not None:
            print(
                f"decay: kappa {report['decay']['kappa_fit']:.4f} vs analytic "
                f"{report['decay']['analytic_rate']:.4f}: "
                f"{'ok' if report['decay']['rate_ok'] else 'FAIL'}"
            )
            if not report["decay"]["rate_ok"]:
                failures.append("decay")

    if failures:
        print(f"FAILED checks: {', '.join(failures)}", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def _apply_cli_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "step", None) is not None:
        scenario = replace(scenario, step=args.step)
    if getattr(args, "duration", None) is not None:
        scenario = replace(scenario, duration=args.duration)
    if getattr(args, "no_bisection", False):
        scenario = replace(scenario, bisection=False)
    return scenario


def _parse_grid(specs: list[str]) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ScenarioError(f"--param expects NAME=V1,V2,..., got {spec!r}")
        name, _, values = spec.partition("=")
        name = name.strip()
        if name not in SWEEPABLE:
            raise ScenarioError(f"unknown sweep parameter {name!r}; choose from {SWEEPABLE}")
        try:
            grid[name] = [float(tok) for tok in values.split(",") if tok.strip()]
        except ValueError as exc:
            raise ScenarioError(f"--param {name}: expected numbers, got {values!r}") from exc
        if not grid[name]:
            raise ScenarioError(f"--param {name}: at least one value is required")
    return grid


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rigidsim",
        description="Event-triggered rigid formation control simulator",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    def add_common(sp, scenario_required=True):
        sp.add_argument(
            "--scenario",
            required=scenario_required,
            help="preset name or scenario file path",
        )
        sp.add_argument("--step", type=float, help="override integration step [s]")
        sp.add_argument("--duration", type=float, help="override run duration [s]")
        sp.add_argument(
            "--no-bisection",
            action="store_true",
            help="detect events at step boundaries only",
        )

    sp = sub.add_parser("run", help="simulate one scenario and write its artifacts")
    add_common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--plot", action="store_true", help="also write plot data and SVG charts")

    sp = sub.add_parser("sweep", help="run a parameter grid")
    add_common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=V1,V2,...",
        help=f"grid axis over one of {SWEEPABLE} (repeatable)",
    )
    sp.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"concurrent cells (default ${WORKERS_ENV} or 1)",
    )

    sp = sub.add_parser("check", help="re-run the verification suite on an existing run")
    sp.add_argument("--out", required=True, help="directory holding trace.csv and events.json")
    sp.add_argument("--scenario", help="scenario (preset or file) for the full check set")

    sp = sub.add_parser("presets", help="list or export built-in presets")
    sp.add_argument("name", nargs="?", help="preset to print as a scenario file")
    sp.add_argument("--out", help="write the preset to this path instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            scenario = _apply_cli_overrides(parse_scenario(args.scenario), args)
            return run_command(scenario, args.out, plot=args.plot)
        if args.verb == "sweep":
            scenario = _apply_cli_overrides(parse_scenario(args.scenario), args)
            grid = _parse_grid(args.param)
            workers = args.workers if args.workers else _default_workers()
            rows = sweep_command(scenario, grid, args.out, workers=workers)
            for row in rows:
                print(row)
            return 0
        if args.verb == "check":
            scenario = parse_scenario(args.scenario) if args.scenario else None
            return check_command(args.out, scenario)
        if args.verb == "presets":
            if not args.name:
                for name in preset_names():
                    print(name)
                return 0
            text = dumps_scenario(parse_scenario(args.name))
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                print(text, end="")
            return 0
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
