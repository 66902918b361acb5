"""Formation control laws and the measurement-deviation vectors they induce.

The gradient of the shape potential V = 1/4 sum e_k^2 with respect to the
stacked positions is R(p)^T e(p); the continuous-time law drives positions
along its negative.  Event-based variants hold the value sampled at the last
event.  The per-agent block of the gradient only involves quantities an agent
can measure locally (relative positions and distance errors on its incident
edges), which is what makes the distributed law implementable.

Sign convention: the held input for agent i is
u_i = sum_{j in N_i} (p_j - p_i) e_k = -{R^T e}_i, matching the compact
stacked form u = -R^T e.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rigidity import (
    FormationGraph,
    FormationState,
    RigidityMatrix,
    _check_state,
    edge_errors,
    edge_vectors,
)


@dataclass(frozen=True)
class HeldControl:
    """A control value frozen at an event time and applied until the next event."""

    value: np.ndarray
    held_since: float
    source_state: FormationState

    def __post_init__(self):
        v = np.array(self.value, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "held_since", float(self.held_since))
        if self.held_since != self.source_state.time:
            raise ValueError("held_since must equal the snapshot time")


def gradient_blocks(graph: FormationGraph, P: np.ndarray) -> np.ndarray:
    """Per-agent blocks of R(p)^T e(p) as an (n, d) matrix.

    Accumulation order is fixed (all tail contributions in edge order, then
    all head contributions) so that stacking per-agent results reproduces the
    centralized vector bit for bit.
    """
    Z = edge_vectors(graph, P)
    e = edge_errors(graph, Z)
    W = e[:, None] * Z
    G = np.zeros_like(P)
    np.add.at(G, graph.tail_index, -W)
    np.add.at(G, graph.head_index, W)
    return G


def instantaneous_control(graph: FormationGraph, state: FormationState) -> np.ndarray:
    """The continuously updated gradient law -R(p)^T e(p), stacked over agents."""
    P = _check_state(graph, state)
    return (-gradient_blocks(graph, P)).ravel()


def centralized_held_control(graph: FormationGraph, snapshot: FormationState) -> HeldControl:
    """Freeze the gradient law at an event-time snapshot of the whole formation."""
    return HeldControl(
        value=instantaneous_control(graph, snapshot),
        held_since=snapshot.time,
        source_state=snapshot,
    )


def delta_centralized(
    graph: FormationGraph, snapshot: FormationState, current: FormationState
) -> np.ndarray:
    """Deviation R(t_h)^T e(t_h) - R(t)^T e(t) between snapshot and current state."""
    Gs = gradient_blocks(graph, _check_state(graph, snapshot))
    Gc = gradient_blocks(graph, _check_state(graph, current))
    return (Gs - Gc).ravel()


def _local_block(graph: FormationGraph, P: np.ndarray, i: int) -> np.ndarray:
    """{R^T e}_i computed from agent i's incident edges only.

    Mirrors the accumulation order of gradient_blocks exactly, so the result
    is bit-identical to gradient_blocks(graph, P)[i - 1].
    """
    tail_ks, head_ks = graph.incident_edges[i - 1]
    acc = np.zeros(graph.dim)
    for k in tail_ks:
        z = P[graph.head_index[k]] - P[graph.tail_index[k]]
        e_k = (z * z).sum() - graph.targets_squared[k]
        acc += -(e_k * z)
    for k in head_ks:
        z = P[graph.head_index[k]] - P[graph.tail_index[k]]
        e_k = (z * z).sum() - graph.targets_squared[k]
        acc += e_k * z
    return acc


def agent_block(graph: FormationGraph, R: RigidityMatrix, e: np.ndarray, i: int) -> np.ndarray:
    """Agent i's d-vector block of R^T e, built from its incident rows of R."""
    if not 1 <= i <= graph.n:
        raise ValueError(f"agent index must lie in 1..{graph.n}, got {i}")
    d = graph.dim
    cols = slice((i - 1) * d, i * d)
    tail_ks, head_ks = graph.incident_edges[i - 1]
    acc = np.zeros(d)
    for k in tail_ks:
        acc += R.entries[k, cols] * e[k]
    for k in head_ks:
        acc += R.entries[k, cols] * e[k]
    return acc


def distributed_held_control(
    graph: FormationGraph, snapshot: FormationState, i: int
) -> HeldControl:
    """Agent i's held input sum_{j in N_i} (p_j - p_i) e_k frozen at its event time."""
    if not 1 <= i <= graph.n:
        raise ValueError(f"agent index must lie in 1..{graph.n}, got {i}")
    P = _check_state(graph, snapshot)
    return HeldControl(
        value=-_local_block(graph, P, i),
        held_since=snapshot.time,
        source_state=snapshot,
    )


def delta_distributed(
    graph: FormationGraph, snapshot_i: FormationState, current: FormationState, i: int
) -> np.ndarray:
    """Agent i's blockwise deviation between its last snapshot and the current state."""
    if not 1 <= i <= graph.n:
        raise ValueError(f"agent index must lie in 1..{graph.n}, got {i}")
    Ps = _check_state(graph, snapshot_i)
    Pc = _check_state(graph, current)
    return _local_block(graph, Ps, i) - _local_block(graph, Pc, i)
