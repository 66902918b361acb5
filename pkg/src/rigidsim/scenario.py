"""Scenario files and built-in presets.

A scenario is a declarative INI-style text file with sections [graph],
[initial], [controller], [trigger], [integration].  The three paper-anchored
presets reproduce the double-tetrahedron benchmark: five agents in 3-D, nine
edges all with target length 2, and the published initial placement.
"""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import replace

import numpy as np

from .engine import CONTROLLER_KINDS, Scenario
from .rigidity import FormationGraph, FormationState
from .triggers import TriggerParams


class ScenarioError(ValueError):
    """A scenario file violated the schema; the message names the offending field."""


DOUBLE_TETRAHEDRON_EDGES = (
    (1, 2), (1, 3), (2, 3),
    (1, 4), (2, 4), (3, 4),
    (1, 5), (2, 5), (3, 5),
)

_BENCH_INITIAL = (
    (0.0, -1.0, 0.5),
    (1.8, 1.6, -0.1),
    (-0.2, 1.8, 0.05),
    (1.2, 1.9, 1.7),
    (-1.0, -1.5, -1.2),
)


def double_tetrahedron_graph(target: float = 2.0) -> FormationGraph:
    """Two tetrahedra sharing the (1,2,3) face; minimally rigid in 3-D."""
    return FormationGraph(
        n=5,
        edges=DOUBLE_TETRAHEDRON_EDGES,
        targets=(target,) * len(DOUBLE_TETRAHEDRON_EDGES),
        dim=3,
    )


def _bench_initial_state() -> FormationState:
    return FormationState(positions=np.array(_BENCH_INITIAL).ravel(), time=0.0)


def _preset_centralized() -> Scenario:
    return Scenario(
        graph=double_tetrahedron_graph(),
        initial=_bench_initial_state(),
        controller="centralized-event",
        trigger=TriggerParams.uniform(5, gamma=0.6),
        step=1e-3,
        duration=20.0,
        sample_every=10,
        bisection=True,
        name="paper-centralized",
    )


def _preset_distributed() -> Scenario:
    return Scenario(
        graph=double_tetrahedron_graph(),
        initial=_bench_initial_state(),
        controller="distributed-event",
        trigger=TriggerParams.uniform(5, gamma_i=0.8, a_i=0.6),
        step=1e-3,
        duration=30.0,
        sample_every=10,
        bisection=True,
        name="paper-distributed",
    )


def _preset_modified() -> Scenario:
    return Scenario(
        graph=double_tetrahedron_graph(),
        initial=_bench_initial_state(),
        controller="modified-distributed-event",
        trigger=TriggerParams.uniform(5, gamma_i=0.8, a_i=0.6, v_i=1.0, theta_i=10.0),
        step=1e-3,
        duration=30.0,
        sample_every=10,
        bisection=True,
        name="paper-modified",
    )


PRESETS = {
    "paper-centralized": _preset_centralized,
    "paper-distributed": _preset_distributed,
    "paper-modified": _preset_modified,
}


def preset_names() -> tuple[str, ...]:
    return tuple(PRESETS)


def _floats(section: str, key: str, raw: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ScenarioError(f"[{section}] {key}: expected numbers, got {raw!r}") from exc


def _one_float(section: str, key: str, raw: str) -> float:
    vals = _floats(section, key, raw)
    if len(vals) != 1:
        raise ScenarioError(f"[{section}] {key}: expected a single number, got {raw!r}")
    return vals[0]


def _require(cp: configparser.ConfigParser, section: str, key: str) -> str:
    if not cp.has_option(section, key):
        raise ScenarioError(f"[{section}] {key}: required field is missing")
    return cp.get(section, key)


def _agent_values(section: str, key: str, raw: str, n: int) -> list[float]:
    vals = _floats(section, key, raw)
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ScenarioError(f"[{section}] {key}: expected 1 or {n} values, got {len(vals)}")
    return vals


def loads_scenario(text: str) -> Scenario:
    """Parse a scenario from its text form, validating every field."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario file does not parse: {exc}") from exc
    for section in ("graph", "initial", "controller", "integration"):
        if not cp.has_section(section):
            raise ScenarioError(f"[{section}]: required section is missing")

    n = int(_one_float("graph", "agents", _require(cp, "graph", "agents")))
    dim = int(_one_float("graph", "dim", _require(cp, "graph", "dim")))
    edge_raw = _require(cp, "graph", "edges").replace(",", " ").split()
    edges = []
    for tok in edge_raw:
        parts = tok.split("-")
        if len(parts) != 2:
            raise ScenarioError(f"[graph] edges: expected 'i-j' pairs, got {tok!r}")
        edges.append((int(parts[0]), int(parts[1])))
    targets = _floats("graph", "targets", _require(cp, "graph", "targets"))
    if len(targets) == 1:
        targets = targets * len(edges)
    try:
        graph = FormationGraph(n=n, edges=tuple(edges), targets=tuple(targets), dim=dim)
    except ValueError as exc:
        raise ScenarioError(f"[graph]: {exc}") from exc

    positions = []
    for i in range(1, n + 1):
        key = f"agent{i}"
        coords = _floats("initial", key, _require(cp, "initial", key))
        if len(coords) != dim:
            raise ScenarioError(f"[initial] {key}: expected {dim} coordinates")
        positions.extend(coords)
    initial = FormationState(positions=np.array(positions), time=0.0)

    controller = _require(cp, "controller", "type").strip()
    if controller not in CONTROLLER_KINDS:
        raise ScenarioError(
            f"[controller] type: must be one of {', '.join(CONTROLLER_KINDS)}, "
            f"got {controller!r}"
        )
    name = cp.get("controller", "name", fallback="").strip()

    kw: dict = {}
    if cp.has_section("trigger"):
        if cp.has_option("trigger", "gamma"):
            kw["gamma"] = _one_float("trigger", "gamma", cp.get("trigger", "gamma"))
        for key in ("gamma_i", "a_i", "v_i", "theta_i"):
            if cp.has_option("trigger", key):
                kw[key] = _agent_values("trigger", key, cp.get("trigger", key), n)
    try:
        trigger = TriggerParams.uniform(n, **kw)
    except ValueError as exc:
        raise ScenarioError(f"[trigger]: {exc}") from exc

    step = _one_float("integration", "step", _require(cp, "integration", "step"))
    duration = _one_float("integration", "duration", _require(cp, "integration", "duration"))
    sample_every = int(
        _one_float("integration", "sample_every", cp.get("integration", "sample_every", fallback="1"))
    )
    bis_raw = cp.get("integration", "bisection", fallback="on").strip().lower()
    if bis_raw not in ("on", "off", "true", "false", "1", "0", "yes", "no"):
        raise ScenarioError(f"[integration] bisection: expected on/off, got {bis_raw!r}")
    bisection = bis_raw in ("on", "true", "1", "yes")

    try:
        return Scenario(
            graph=graph,
            initial=initial,
            controller=controller,
            trigger=trigger,
            step=step,
            duration=duration,
            sample_every=sample_every,
            bisection=bisection,
            name=name,
        )
    except ValueError as exc:
        raise ScenarioError(f"[integration]: {exc}") from exc


def parse_scenario(source: str | os.PathLike) -> Scenario:
    """Load a scenario from a preset name or a scenario file path."""
    key = str(source)
    if key in PRESETS:
        return PRESETS[key]()
    if not os.path.exists(key):
        raise ScenarioError(
            f"{key!r} is neither a preset ({', '.join(PRESETS)}) nor an existing file"
        )
    with open(key, "r", encoding="utf-8") as fh:
        return loads_scenario(fh.read())


def dumps_scenario(s: Scenario) -> str:
    """Serialize a scenario to its text form; parsing it back gives an equal scenario."""
    d = s.graph.dim
    out = io.StringIO()
    out.write("[graph]\n")
    out.write(f"agents = {s.graph.n}\n")
    out.write(f"dim = {d}\n")
    out.write("edges = " + " ".join(f"{i}-{j}" for i, j in s.graph.edges) + "\n")
    out.write("targets = " + " ".join(repr(t) for t in s.graph.targets) + "\n")
    out.write("\n[initial]\n")
    P = s.initial.grid(d)
    for i in range(s.graph.n):
        out.write(f"agent{i + 1} = " + " ".join(repr(float(x)) for x in P[i]) + "\n")
    out.write("\n[controller]\n")
    out.write(f"type = {s.controller}\n")
    if s.name:
        out.write(f"name = {s.name}\n")
    out.write("\n[trigger]\n")
    out.write(f"gamma = {s.trigger.gamma!r}\n")
    for key in ("gamma_i", "a_i", "v_i", "theta_i"):
        vals = getattr(s.trigger, key)
        out.write(f"{key} = " + " ".join(repr(float(x)) for x in vals) + "\n")
    out.write("\n[integration]\n")
    out.write(f"step = {s.step!r}\n")
    out.write(f"duration = {s.duration!r}\n")
    out.write(f"sample_every = {s.sample_every}\n")
    out.write(f"bisection = {'on' if s.bisection else 'off'}\n")
    return out.getvalue()


def save_scenario(s: Scenario, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenario(s))


# Parameters a sweep may vary: trigger knobs plus the integration step.
SWEEPABLE = ("gamma", "gamma_i", "a_i", "v_i", "theta_i", "step")


def apply_override(s: Scenario, param: str, value: float) -> Scenario:
    """A copy of the scenario with one sweepable parameter replaced."""
    if param == "step":
        return replace(s, step=float(value))
    if param not in SWEEPABLE:
        raise ScenarioError(f"unknown sweep parameter {param!r}; choose from {SWEEPABLE}")
    n = s.graph.n
    fields = {
        "gamma": s.trigger.gamma,
        "gamma_i": s.trigger.gamma_i,
        "a_i": s.trigger.a_i,
        "v_i": s.trigger.v_i,
        "theta_i": s.trigger.theta_i,
    }
    fields[param] = float(value)
    try:
        trigger = TriggerParams.uniform(n, **fields)
    except ValueError as exc:
        raise ScenarioError(f"[trigger]: {exc}") from exc
    return replace(s, trigger=trigger)
