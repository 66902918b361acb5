"""Post-run verification: decay rates, event statistics, invariance checks.

Analytic constants (eigenvalue extrema, growth constants, the uniform block
lower bound) are evaluated along the recorded trajectory rather than over the
uncomputable local sub-level set, so every report labels them "empirical".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import engine
from .engine import EventLog, Scenario, SimulationTrace
from .rigidity import (
    FormationGraph,
    FormationState,
    grammian_eigen_bounds,
    rigidity_function,
    rigidity_matrix,
)
from .triggers import (
    GLOBAL,
    Scope,
    spectral_growth_constant,
    zeno_bound_centralized,
    zeno_bound_distributed,
)

# Samples with ||e|| below this relative floor sit in numerical noise and are
# excluded from decay fitting to avoid flattening bias.
DECAY_FLOOR_REL = 1e-10
MIN_FIT_SAMPLES = 10


def fit_decay_rate(trace: SimulationTrace) -> float:
    """Least-squares slope of -ln ||e(t)|| over the usable part of a convergent run."""
    en = trace.error_norms
    if not en[-1] < en[0]:
        raise ValueError("trace is not convergent: final ||e|| is not below the initial one")
    usable = en > DECAY_FLOOR_REL * en[0]
    if int(usable.sum()) < MIN_FIT_SAMPLES:
        raise ValueError(
            f"need at least {MIN_FIT_SAMPLES} usable samples to fit a rate, "
            f"got {int(usable.sum())}"
        )
    t = trace.times[usable]
    y = -np.log(en[usable])
    slope = np.polyfit(t, y, 1)[0]
    return float(slope)


@dataclass(frozen=True)
class EventStats:
    count: int
    min_gap: float | None
    mean_gap: float | None


def inter_event_stats(log: EventLog) -> dict[Scope, EventStats]:
    """Per-scope event counts and consecutive-gap statistics."""
    if len(log) == 0:
        raise ValueError("event log is empty")
    out: dict[Scope, EventStats] = {}
    for scope in log.scopes():
        times = log.times_for(scope)
        if times.size < 2:
            out[scope] = EventStats(count=int(times.size), min_gap=None, mean_gap=None)
            continue
        gaps = np.diff(times)
        out[scope] = EventStats(
            count=int(times.size),
            min_gap=float(gaps.min()),
            mean_gap=float(gaps.mean()),
        )
    return out


def centroid_drift(trace: SimulationTrace) -> float:
    """Largest distance of the sampled centroid from its initial location."""
    dev = trace.centroid - trace.centroid[0]
    return float(np.sqrt((dev * dev).sum(axis=1)).max())


@dataclass(frozen=True)
class InvarianceReport:
    """Deviations between a run and its rigidly transformed twin.

    Event comparisons carry two flavors: over the full run, and restricted to
    events that fire while ||e|| is still above the numerical noise floor
    (DECAY_FLOOR_REL relative to ||e(0)||).  Once the errors sit in rounding
    noise, trigger values compare numbers of size ~1e-28 and event times stop
    being meaningful, so the floored figures are the behavioral contract.
    """

    max_error_deviation: float
    max_event_time_deviation: float
    event_counts_match: bool
    max_event_time_deviation_full: float
    event_counts_match_full: bool
    noise_floor_time: float


def se_invariance_check(
    scenario: Scenario,
    rotation: np.ndarray,
    translation: np.ndarray,
    base: tuple[SimulationTrace, EventLog] | None = None,
) -> InvarianceReport:
    """Run the scenario and its rigidly transformed twin; compare traces and events.

    The distance-error traces are compared on the shared regular sample grid;
    event times are compared per scope.  Pass `base` to reuse an existing run
    of the untransformed scenario.
    """
    d = scenario.graph.dim
    Q = np.asarray(rotation, dtype=float)
    theta = np.asarray(translation, dtype=float).ravel()
    if Q.shape != (d, d) or theta.shape != (d,):
        raise ValueError(f"rotation must be {d}x{d} and translation length {d}")
    if np.abs(Q.T @ Q - np.eye(d)).max() > 1e-12:
        raise ValueError("rotation must be orthogonal: Q^T Q = I within 1e-12")
    if np.linalg.det(Q) < 0:
        raise ValueError("rotation must have determinant +1")

    if base is None:
        base = engine.run(scenario)
    trace_a, log_a = base

    P0 = scenario.initial.grid(d)
    moved = replace(
        scenario,
        initial=FormationState(positions=(P0 @ Q.T + theta).ravel(), time=0.0),
    )
    trace_b, log_b = engine.run(moved)

    ga, gb = trace_a.grid_mask, trace_b.grid_mask
    if not np.array_equal(trace_a.times[ga], trace_b.times[gb]):
        raise RuntimeError("regular sample grids of the two runs do not line up")
    err_dev = float(np.abs(trace_a.errors[ga] - trace_b.errors[gb]).max())

    en = trace_a.error_norms
    above = en > DECAY_FLOOR_REL * en[0]
    cutoff = float(trace_a.times[above][-1]) if above.any() else 0.0

    dev_floor, dev_full = 0.0, 0.0
    match_floor, match_full = True, True
    for scope in set(log_a.scopes()) | set(log_b.scopes()):
        ta, tb = log_a.times_for(scope), log_b.times_for(scope)
        if ta.size != tb.size:
            match_full = False
        k = min(ta.size, tb.size)
        if k:
            dev_full = max(dev_full, float(np.abs(ta[:k] - tb[:k]).max()))
        ka = int((ta <= cutoff).sum())
        kb = int((tb <= cutoff).sum())
        if ka != kb:
            match_floor = False
        kf = min(ka, kb)
        if kf:
            dev_floor = max(dev_floor, float(np.abs(ta[:kf] - tb[:kf]).max()))
    return InvarianceReport(
        max_error_deviation=err_dev,
        max_event_time_deviation=dev_floor,
        event_counts_match=match_floor,
        max_event_time_deviation_full=dev_full,
        event_counts_match_full=match_full,
        noise_floor_time=cutoff,
    )


def fd_jacobian_oracle(
    graph: FormationGraph, state: FormationState, h_fd: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian of the rigidity function (test oracle)."""
    if not h_fd > 0:
        raise ValueError(f"h_fd must be > 0, got {h_fd}")
    p = state.positions
    J = np.zeros((graph.m, p.size))
    for col in range(p.size):
        dp = np.zeros_like(p)
        dp[col] = h_fd
        r_plus = rigidity_function(graph, FormationState(p + dp, state.time))
        r_minus = rigidity_function(graph, FormationState(p - dp, state.time))
        J[:, col] = (r_plus - r_minus) / (2.0 * h_fd)
    return J


def measure_epsilon(trace: SimulationTrace, floor: float = 1e-10) -> float:
    """Smallest ratio ||{R^T e}_i||^2 / ||e||^2 over agents and usable samples.

    A zero value signals that some agent's gradient block crossed zero while
    the distance error was still significant.
    """
    en = trace.error_norms
    usable = en > floor
    if not usable.any():
        raise ValueError("no samples with ||e|| above the floor")
    ratios = trace.block_norms[usable] ** 2 / (en[usable, None] ** 2)
    return float(ratios.min())


def _spectral_extrema(graph: FormationGraph, trace: SimulationTrace) -> tuple[float, float]:
    """Trajectory extrema of the Gram-matrix spectrum: (min lambda_min, max lambda_max)."""
    lam_min = math.inf
    lam_max = 0.0
    for row in trace.positions:
        R = rigidity_matrix(graph, FormationState(positions=row, time=0.0))
        lo, hi = grammian_eigen_bounds(R)
        lam_min = min(lam_min, lo)
        lam_max = max(lam_max, hi)
    return lam_min, lam_max


def _trigger_condition_violation(
    scenario: Scenario, trace: SimulationTrace
) -> float:
    """Worst violation of the enforced trigger inequality over all samples.

    Centralized: ||delta|| - gamma ||R^T e||.  Distributed: the quadratic
    condition in its normalized form (1/2a_i)||delta_i||^2 minus the
    threshold; the modified variant subtracts its decaying floor.
    """
    params = scenario.trigger
    if scenario.controller == "continuous":
        return 0.0
    if scenario.controller == "centralized-event":
        grad_norm = np.sqrt((trace.block_norms**2).sum(axis=1))
        viol = trace.delta_norms[:, 0] - params.gamma * grad_norm
        return float(viol.max())
    dsq = trace.delta_norms**2
    bsq = trace.block_norms**2
    lhs = dsq / (2.0 * params.a_i)
    rhs = params.gamma_i * (2.0 - params.a_i) / 2.0 * bsq
    if scenario.controller == "modified-distributed-event":
        rhs = rhs + params.v_i * np.exp(-params.theta_i * trace.times[:, None])
    return float((lhs - rhs).max())


def build_report(scenario: Scenario, trace: SimulationTrace, log: EventLog) -> dict:
    """Assemble the verification report for one run as a JSON-ready mapping."""
    g = scenario.graph
    params = scenario.trigger
    en = trace.error_norms
    lam_min, lam_max = _spectral_extrema(g, trace)

    v = trace.lyapunov
    max_increase = float(np.diff(v).max()) if v.size > 1 else 0.0

    try:
        kappa = fit_decay_rate(trace)
    except ValueError:
        kappa = None

    if scenario.controller in ("distributed-event", "modified-distributed-event"):
        zeta_min = float(((1.0 - params.gamma_i) * (2.0 - params.a_i) / 2.0).min())
        analytic_rate = 2.0 * zeta_min * lam_min
    else:
        analytic_rate = 2.0 * (1.0 - params.gamma) * lam_min

    final_displacement = None
    tail = trace.times >= 0.9 * scenario.duration
    if tail.sum() >= 2:
        dev = trace.positions[tail] - trace.positions[tail][-1]
        final_displacement = float(np.sqrt((dev * dev).sum(axis=1)).max())

    report = {
        "scenario": {
            "name": scenario.name,
            "controller": scenario.controller,
            "step": scenario.step,
            "duration": scenario.duration,
            "agents": g.n,
            "edges": g.m,
            "dim": g.dim,
        },
        "convergence": {
            "initial_error_norm": float(en[0]),
            "final_error_norm": float(en[-1]),
            "final_max_abs_error": float(np.abs(trace.errors[-1]).max()),
            "final_displacement": final_displacement,
        },
        "lyapunov": {
            "monotone": bool(max_increase <= 1e-12),
            "max_increase": max_increase,
        },
        "decay": {
            "kappa_fit": kappa,
            "empirical_lambda_min": lam_min,
            "analytic_rate": analytic_rate,
            "rate_ok": bool(kappa is not None and kappa >= 0.95 * analytic_rate),
        },
        "centroid": {"max_drift": centroid_drift(trace)},
        "trigger_condition": {"max_violation": _trigger_condition_violation(scenario, trace)},
        "events": {},
    }

    if len(log):
        stats = inter_event_stats(log)
        report["events"] = {
            str(scope): {"count": s.count, "min_gap": s.min_gap, "mean_gap": s.mean_gap}
            for scope, s in stats.items()
        }

    if scenario.controller == "centralized-event":
        alpha = spectral_growth_constant(g, float(en[0]), lam_max)
        tau_printed = zeno_bound_centralized(g, float(en[0]), lam_max, params.gamma)
        tau_conservative = zeno_bound_centralized(
            g, float(en[0]), lam_max, params.gamma, lambda_coefficient=2.0
        )
        gaps = np.diff(log.times_for(GLOBAL))
        min_gap = float(gaps.min()) if gaps.size else None
        report["zeno"] = {
            "empirical_alpha": alpha,
            "empirical_lambda_max": lam_max,
            "tau_printed": tau_printed,
            "tau_conservative": tau_conservative,
            "min_gap": min_gap,
            "printed_ok": bool(min_gap is None or min_gap >= tau_printed),
            "conservative_ok": bool(min_gap is None or min_gap >= tau_conservative),
        }
    elif scenario.controller in ("distributed-event", "modified-distributed-event"):
        alpha = spectral_growth_constant(g, float(en[0]), lam_max)
        eps = measure_epsilon(trace)
        per_agent = {}
        all_ok = True
        for i in range(1, g.n + 1):
            bounds = zeno_bound_distributed(params, i, g.m, alpha, eps, lam_max)
            times = log.times_for(i)
            gaps = np.diff(times)
            min_gap = float(gaps.min()) if gaps.size else None
            ok = bool(
                bounds.tau_bar is None or min_gap is None or min_gap >= bounds.tau_bar
            )
            all_ok = all_ok and ok
            per_agent[str(i)] = {
                "tau_star": bounds.tau_star,
                "tau_bar": bounds.tau_bar,
                "min_gap": min_gap,
                "bound_ok": ok,
            }
        report["zeno"] = {
            "empirical_alpha": alpha,
            "empirical_lambda_max": lam_max,
            "empirical_epsilon": eps,
            "per_agent": per_agent,
            "all_bounds_ok": all_ok,
        }

    return report


def scaled_initial(scenario: Scenario, factor: float) -> Scenario:
    """The same scenario with initial positions scaled about the origin."""
    return replace(
        scenario,
        initial=FormationState(positions=factor * scenario.initial.positions, time=0.0),
    )
