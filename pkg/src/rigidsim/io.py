"""On-disk formats for traces, event logs, reports, and plot exports.

Column order of the trace CSV is fixed: time, the n*d position coordinates
(agent-major), the m distance errors in edge order, the shape potential V,
the d centroid coordinates, the n per-agent gradient-block norms, and the
active deviation norm(s).  Floats are written as shortest round-trip
decimals, so identical runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .engine import EventLog, EventRecord, Scenario, SimulationTrace

_AXES = "xyz"

TRACE_FILENAME = "trace.csv"
EVENTS_FILENAME = "events.json"
REPORT_FILENAME = "report.json"
PLOT_DATA_FILENAME = "plot_data.csv"


def _fmt(x) -> str:
    return repr(float(x))


def trace_header(n: int, dim: int, m: int, delta_cols: int) -> list[str]:
    cols = ["time"]
    cols += [f"p{i + 1}_{_AXES[a]}" for i in range(n) for a in range(dim)]
    cols += [f"e{k + 1}" for k in range(m)]
    cols += ["V"]
    cols += [f"centroid_{_AXES[a]}" for a in range(dim)]
    cols += [f"block{i + 1}" for i in range(n)]
    if delta_cols == 1:
        cols += ["delta"]
    else:
        cols += [f"delta{i + 1}" for i in range(delta_cols)]
    return cols


def write_trace_csv(trace: SimulationTrace, path: str | os.PathLike) -> None:
    n, m, dim = trace.n, trace.m, trace.dim
    delta_cols = trace.delta_norms.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(n, dim, m, delta_cols))
        for r in range(trace.times.size):
            row = [_fmt(trace.times[r])]
            row += [_fmt(x) for x in trace.positions[r]]
            row += [_fmt(x) for x in trace.errors[r]]
            row += [_fmt(trace.lyapunov[r])]
            row += [_fmt(x) for x in trace.centroid[r]]
            row += [_fmt(x) for x in trace.block_norms[r]]
            row += [_fmt(x) for x in trace.delta_norms[r]]
            w.writerow(row)


def read_trace_csv(path: str | os.PathLike, controller: str = "") -> SimulationTrace:
    """Rebuild a trace from its CSV form (grid metadata is not persisted)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n = sum(1 for c in header if c.startswith("block"))
    dim = sum(1 for c in header if c.startswith("centroid_"))
    m = sum(1 for c in header if c.startswith("e") and c[1:].isdigit())
    delta_cols = sum(1 for c in header if c.startswith("delta"))
    expected = trace_header(n, dim, m, delta_cols)
    if header != expected:
        raise ValueError(f"unexpected trace header in {path}")
    arr = np.array([[float(x) for x in row] for row in data])
    off = 0

    def take(width):
        nonlocal off
        block = arr[:, off : off + width]
        off += width
        return block

    times = take(1)[:, 0]
    positions = take(n * dim)
    errors = take(m)
    lyapunov = take(1)[:, 0]
    centroid = take(dim)
    block_norms = take(n)
    delta_norms = take(delta_cols)
    if not controller:
        controller = "distributed-event" if delta_cols == n and n > 1 else "centralized-event"
    return SimulationTrace(
        controller=controller,
        dim=dim,
        times=times,
        positions=positions,
        errors=errors,
        lyapunov=lyapunov,
        centroid=centroid,
        block_norms=block_norms,
        delta_norms=delta_norms,
        grid_mask=np.ones(times.size, dtype=bool),
    )


def write_events_json(log: EventLog, path: str | os.PathLike) -> None:
    payload = [
        {
            "scope": ev.scope,
            "time": ev.time,
            "value": ev.value,
            "delta_norm": ev.delta_norm,
        }
        for ev in log.events
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_events_json(path: str | os.PathLike) -> EventLog:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    events = tuple(
        EventRecord(
            scope=item["scope"] if item["scope"] == "global" else int(item["scope"]),
            time=float(item["time"]),
            value=float(item["value"]),
            delta_norm=float(item["delta_norm"]),
        )
        for item in payload
    )
    return EventLog(events=events)


def write_report_json(report: dict, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _thresholds(scenario: Scenario, trace: SimulationTrace) -> np.ndarray:
    """Per-sample deviation-norm thresholds, one column per delta column."""
    params = scenario.trigger
    if trace.delta_norms.shape[1] == 1:
        grad_norm = np.sqrt((trace.block_norms**2).sum(axis=1))
        return (params.gamma * grad_norm)[:, None]
    thr_sq = params.varrho * trace.block_norms**2
    if scenario.controller == "modified-distributed-event":
        thr_sq = thr_sq + 2.0 * params.a_i * params.v_i * np.exp(
            -params.theta_i * trace.times[:, None]
        )
    return np.sqrt(thr_sq)


def write_plot_data(
    scenario: Scenario, trace: SimulationTrace, log: EventLog, path: str | os.PathLike
) -> None:
    """Tidy long-format (series, time, value) data for external plotting."""
    thr = _thresholds(scenario, trace)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "time", "value"])
        for k in range(trace.m):
            for r in range(trace.times.size):
                w.writerow([f"e{k + 1}", _fmt(trace.times[r]), _fmt(trace.errors[r, k])])
        for r in range(trace.times.size):
            w.writerow(["V", _fmt(trace.times[r]), _fmt(trace.lyapunov[r])])
        delta_names = (
            ["delta"]
            if trace.delta_norms.shape[1] == 1
            else [f"delta{i + 1}" for i in range(trace.delta_norms.shape[1])]
        )
        for c, name in enumerate(delta_names):
            for r in range(trace.times.size):
                w.writerow([name, _fmt(trace.times[r]), _fmt(trace.delta_norms[r, c])])
            for r in range(trace.times.size):
                w.writerow([f"threshold_{name}", _fmt(trace.times[r]), _fmt(thr[r, c])])
        for ev in log.events:
            y = 0 if ev.scope == "global" else int(ev.scope)
            w.writerow([f"event_{ev.scope}", _fmt(ev.time), _fmt(y)])


def write_plots(
    scenario: Scenario, trace: SimulationTrace, log: EventLog, outdir: str | os.PathLike
) -> list[str]:
    """Simple SVG line charts: distance errors, deviations vs thresholds, event raster."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for k in range(trace.m):
        ax.plot(trace.times, trace.errors[:, k], lw=0.8, label=f"e{k + 1}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("squared distance error")
    ax.legend(fontsize=6, ncol=3)
    ax.grid(True, alpha=0.3)
    path = os.path.join(outdir, "errors.svg")
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    thr = _thresholds(scenario, trace)
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in range(trace.delta_norms.shape[1]):
        label = "delta" if trace.delta_norms.shape[1] == 1 else f"delta{c + 1}"
        (line,) = ax.plot(trace.times, trace.delta_norms[:, c], lw=0.8, label=label)
        ax.plot(trace.times, thr[:, c], lw=0.8, ls="--", color=line.get_color())
    ax.set_xlabel("time [s]")
    ax.set_ylabel("deviation norm (dashed: threshold)")
    ax.legend(fontsize=6)
    ax.grid(True, alpha=0.3)
    path = os.path.join(outdir, "deltas.svg")
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 3))
    for ev in log.events:
        y = 0 if ev.scope == "global" else int(ev.scope)
        ax.plot([ev.time], [y], "|", color="tab:blue", markersize=10)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("scope (0 = global)")
    ax.set_ylim(-0.5, trace.n + 0.5)
    ax.grid(True, alpha=0.3)
    path = os.path.join(outdir, "events.svg")
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written
