"""Graph rigidity machinery: incidence matrices, rigidity matrices, rank tests.

Agents are numbered 1..n and edges carry a canonical orientation (i, j) with
i < j.  Every downstream object (rows of the incidence matrix, entries of the
distance-error vector, row blocks of the rigidity matrix) shares the edge
ordering fixed at graph construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Relative tolerance used to separate numerical rank from noise floor.
DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class FormationGraph:
    """Undirected formation graph with per-edge target distances.

    Attributes:
        n: number of agents (vertices), numbered 1..n.
        edges: m vertex pairs (i, j), canonically oriented with i < j.
        targets: m desired inter-agent distances, strictly positive.
        dim: ambient dimension, 2 or 3.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    targets: tuple[float, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if self.n < 1:
            raise ValueError(f"graph.n must be >= 1, got {self.n}")
        if self.dim not in (2, 3):
            raise ValueError(f"graph.dim must be 2 or 3, got {self.dim}")
        seen = set()
        for i, j in self.edges:
            if not (1 <= i < j <= self.n):
                raise ValueError(f"edge ({i}, {j}) violates 1 <= i < j <= n with n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if len(self.targets) != len(self.edges):
            raise ValueError(
                f"targets has length {len(self.targets)}, expected m={len(self.edges)}"
            )
        for k, t in enumerate(self.targets):
            if not (t > 0.0) or not np.isfinite(t):
                raise ValueError(f"targets[{k}] must be finite and > 0, got {t}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def tail_index(self) -> np.ndarray:
        """0-based tail vertex (the i of each canonical edge)."""
        return np.array([i - 1 for i, _ in self.edges], dtype=np.intp)

    @cached_property
    def head_index(self) -> np.ndarray:
        """0-based head vertex (the j of each canonical edge)."""
        return np.array([j - 1 for _, j in self.edges], dtype=np.intp)

    @cached_property
    def targets_squared(self) -> np.ndarray:
        return np.array([t * t for t in self.targets])

    @cached_property
    def incident_edges(self) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
        """Per agent, the edge indices where it is tail resp. head (ascending)."""
        tails: list[list[int]] = [[] for _ in range(self.n)]
        heads: list[list[int]] = [[] for _ in range(self.n)]
        for k, (i, j) in enumerate(self.edges):
            tails[i - 1].append(k)
            heads[j - 1].append(k)
        return tuple((tuple(t), tuple(h)) for t, h in zip(tails, heads))

    def neighbors(self, i: int) -> tuple[int, ...]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return tuple(out)


@dataclass(frozen=True, eq=False)
class FormationState:
    """Stacked agent positions in R^d (agent-major) at a time instant."""

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        p = np.array(self.positions, dtype=float).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise ValueError("positions must be a nonempty finite vector")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "time", float(self.time))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormationState):
            return NotImplemented
        return self.time == other.time and np.array_equal(self.positions, other.positions)

    def grid(self, dim: int) -> np.ndarray:
        """Positions as an (n, dim) matrix (one agent per row)."""
        return self.positions.reshape(-1, dim)


@dataclass(frozen=True)
class RigidityMatrix:
    """m x (d n) rigidity matrix evaluated at one state.

    Row k is nonzero only in the column blocks of the two endpoints of edge k,
    holding (p_i - p_j)^T and (p_j - p_i)^T; equivalently the matrix factors
    as Z^T Hbar with Z the block diagonal of the relative position vectors.
    """

    entries: np.ndarray
    source_time: float = 0.0

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError("entries must be a 2-D matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "source_time", float(self.source_time))


def _check_state(graph: FormationGraph, state: FormationState) -> np.ndarray:
    if state.positions.size != graph.n * graph.dim:
        raise ValueError(
            f"state has {state.positions.size} coordinates, "
            f"expected n*dim = {graph.n * graph.dim}"
        )
    return state.grid(graph.dim)


def build_incidence(graph: FormationGraph) -> np.ndarray:
    """Incidence matrix H (m x n): row k holds -1 at the tail, +1 at the head."""
    H = np.zeros((graph.m, graph.n))
    rows = np.arange(graph.m)
    H[rows, graph.tail_index] = -1.0
    H[rows, graph.head_index] = 1.0
    return H


def edge_vectors(graph: FormationGraph, P: np.ndarray) -> np.ndarray:
    """Relative positions z_k = p_j - p_i for each canonical edge, as (m, d) rows."""
    return P[graph.head_index] - P[graph.tail_index]


def edge_errors(graph: FormationGraph, Z: np.ndarray) -> np.ndarray:
    """Squared distance errors e_k = ||z_k||^2 - d_k^2 from edge vectors."""
    return (Z * Z).sum(axis=1) - graph.targets_squared


def relative_positions(graph: FormationGraph, state: FormationState) -> np.ndarray:
    """Stacked relative positions (m, d): row k is p_j - p_i for edge k = (i, j)."""
    return edge_vectors(graph, _check_state(graph, state))


def distance_errors(graph: FormationGraph, state: FormationState) -> np.ndarray:
    """Per-edge squared distance errors ||p_i - p_j||^2 - d_k^2."""
    return edge_errors(graph, edge_vectors(graph, _check_state(graph, state)))


def rigidity_function(graph: FormationGraph, state: FormationState) -> np.ndarray:
    """Half the squared edge lengths, one entry per edge."""
    Z = relative_positions(graph, state)
    return 0.5 * (Z * Z).sum(axis=1)


def rigidity_matrix(graph: FormationGraph, state: FormationState) -> RigidityMatrix:
    """Jacobian of the rigidity function at the given state."""
    P = _check_state(graph, state)
    Z = edge_vectors(graph, P)
    d = graph.dim
    R = np.zeros((graph.m, graph.n * d))
    cols = np.arange(d)
    rows = np.arange(graph.m)[:, None]
    R[rows, graph.tail_index[:, None] * d + cols] = -Z
    R[rows, graph.head_index[:, None] * d + cols] = Z
    return RigidityMatrix(entries=R, source_time=state.time)


def rigidity_rank(R: RigidityMatrix, tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank: singular values above tol times the largest one."""
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    s = np.linalg.svd(R.entries, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rigid_rank_target(n: int, dim: int) -> int:
    """Rank certifying infinitesimal rigidity: d n - d(d+1)/2."""
    return dim * n - dim * (dim + 1) // 2


def is_minimally_infinitesimally_rigid(
    graph: FormationGraph, state: FormationState, tol: float = DEFAULT_RANK_TOL
) -> bool:
    """True iff the framework has exactly d n - d(d+1)/2 edges and full rigidity rank."""
    target = rigid_rank_target(graph.n, graph.dim)
    if graph.m != target:
        return False
    return rigidity_rank(rigidity_matrix(graph, state), tol) == target


def grammian_eigen_bounds(R: RigidityMatrix) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the edge Gram matrix R R^T.

    The largest eigenvalue coincides with that of R^T R (the nonzero spectra
    agree), so the returned pair serves both conventions: the minimum is the
    quantity entering the convergence-rate bound, the maximum the one entering
    the inter-event time bound.
    """
    M = R.entries @ R.entries.T
    w = np.linalg.eigvalsh(M)
    return float(w[0]), float(w[-1])
