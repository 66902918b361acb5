"""Event functions, per-scope trigger bookkeeping, and inter-event time bounds.

An event fires when the relevant event value reaches zero from below; firing
re-snapshots the held control so the deviation resets to exactly zero.  The
analytic lower bounds on inter-event times are what excludes Zeno behavior;
they are evaluated here from caller-supplied constants (typically measured
along a recorded trajectory).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .rigidity import FormationGraph, FormationState, build_incidence

# Scope key for the centralized (whole-formation) trigger.
GLOBAL = "global"
Scope = Union[str, int]


def _as_agent_array(name: str, value, n: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or a length-{n} sequence")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TriggerParams:
    """Trigger thresholds for all controller variants.

    gamma is the centralized threshold factor; gamma_i and a_i shape the
    per-agent quadratic condition (their product rho_i = gamma_i a_i (2 - a_i)
    stays in (0,1)); v_i and theta_i parameterize the exponential floor of the
    modified per-agent condition.  Open-interval constraints are enforced at
    construction.
    """

    gamma: float
    gamma_i: np.ndarray
    a_i: np.ndarray
    v_i: np.ndarray
    theta_i: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in the open interval (0, 1), got {self.gamma}")
        n = np.asarray(self.gamma_i).size
        for name in ("gamma_i", "a_i", "v_i", "theta_i"):
            object.__setattr__(self, name, _as_agent_array(name, getattr(self, name), n))
        for name in ("gamma_i", "a_i"):
            arr = getattr(self, name)
            if not np.all((arr > 0.0) & (arr < 1.0)):
                raise ValueError(f"every {name} must lie in the open interval (0, 1)")
        for name in ("v_i", "theta_i"):
            arr = getattr(self, name)
            if not np.all(arr > 0.0):
                raise ValueError(f"every {name} must be > 0")
        if not np.all((self.varrho > 0.0) & (self.varrho < 1.0)):
            raise ValueError("derived varrho_i = gamma_i a_i (2 - a_i) left (0, 1)")

    @classmethod
    def uniform(
        cls,
        n: int,
        gamma: float = 0.5,
        gamma_i=0.5,
        a_i=0.5,
        v_i=1.0,
        theta_i=1.0,
    ) -> "TriggerParams":
        """Broadcast scalars (or pass per-agent sequences) to an n-agent parameter set."""
        return cls(
            gamma=gamma,
            gamma_i=_as_agent_array("gamma_i", gamma_i, n),
            a_i=_as_agent_array("a_i", a_i, n),
            v_i=_as_agent_array("v_i", v_i, n),
            theta_i=_as_agent_array("theta_i", theta_i, n),
        )

    @property
    def n(self) -> int:
        return self.gamma_i.size

    @property
    def varrho(self) -> np.ndarray:
        """Per-agent quadratic threshold factor gamma_i a_i (2 - a_i)."""
        return self.gamma_i * self.a_i * (2.0 - self.a_i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TriggerParams):
            return NotImplemented
        return self.gamma == other.gamma and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("gamma_i", "a_i", "v_i", "theta_i")
        )


@dataclass(frozen=True)
class ScopeRecord:
    """Bookkeeping for one trigger scope: the held snapshot and event counters."""

    snapshot: FormationState
    last_event_time: float
    event_count: int


@dataclass(frozen=True)
class TriggerState:
    """Immutable map of trigger scopes (GLOBAL or 1-based agent index) to records."""

    scopes: Mapping[Scope, ScopeRecord]

    @classmethod
    def empty(cls) -> "TriggerState":
        return cls(scopes={})

    def record(self, scope: Scope) -> ScopeRecord | None:
        return self.scopes.get(scope)


def fire_and_reset(
    trigger: TriggerState, current: FormationState, scope: Scope = GLOBAL
) -> TriggerState:
    """Fire the given scope at the current state, re-snapshotting its held data.

    Event times must strictly increase per scope; the deviation recomputed
    from the new snapshot against `current` is exactly zero.
    """
    prev = trigger.record(scope)
    if prev is not None and current.time <= prev.last_event_time:
        raise ValueError(
            f"event time {current.time} does not strictly increase past "
            f"{prev.last_event_time} for scope {scope!r}"
        )
    scopes = dict(trigger.scopes)
    scopes[scope] = ScopeRecord(
        snapshot=current,
        last_event_time=current.time,
        event_count=(prev.event_count if prev else 0) + 1,
    )
    return TriggerState(scopes=scopes)


def centralized_event_value(delta: np.ndarray, gradient: np.ndarray, gamma: float) -> float:
    """||delta|| - gamma ||R^T e||; an event is due when this reaches zero."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in the open interval (0, 1), got {gamma}")
    return float(np.linalg.norm(delta) - gamma * np.linalg.norm(gradient))


def distributed_event_value(
    delta_i: np.ndarray, block_i: np.ndarray, params: TriggerParams, i: int
) -> float:
    """||delta_i||^2 - rho_i ||{R^T e}_i||^2 for agent i's local condition."""
    rho = params.varrho[i - 1]
    dsq = float(np.dot(delta_i, delta_i))
    bsq = float(np.dot(block_i, block_i))
    return dsq - rho * bsq


def modified_event_value(
    delta_i: np.ndarray, block_i: np.ndarray, params: TriggerParams, i: int, t: float
) -> float:
    """Distributed event value minus the decaying floor 2 a_i v_i exp(-theta_i t).

    The floor keeps the firing threshold strictly positive at every finite
    time, even when the local gradient block crosses zero.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    a = params.a_i[i - 1]
    v = params.v_i[i - 1]
    theta = params.theta_i[i - 1]
    return distributed_event_value(delta_i, block_i, params, i) - 2.0 * a * v * math.exp(-theta * t)


def spectral_growth_constant(
    graph: FormationGraph,
    e0_norm: float,
    lambda_max: float,
    lambda_coefficient: float = math.sqrt(2.0),
) -> float:
    """The deviation growth-rate constant sqrt(d) ||H||^2 ||e(0)|| + c lambda_max.

    ||Hbar|| equals ||H|| because the Kronecker factor is an identity.  The
    default coefficient c = sqrt(2) follows the closed-form bound; c = 2 gives
    the conservative variant obtained by bounding ||2 R^T R|| directly.
    """
    if not e0_norm > 0 or not lambda_max > 0:
        raise ValueError("e0_norm and lambda_max must be > 0")
    H_norm = np.linalg.norm(build_incidence(graph), 2)
    return float(
        math.sqrt(graph.dim) * H_norm * H_norm * e0_norm + lambda_coefficient * lambda_max
    )


def zeno_bound_centralized(
    graph: FormationGraph,
    e0_norm: float,
    lambda_max: float,
    gamma: float,
    lambda_coefficient: float = math.sqrt(2.0),
) -> float:
    """Positive lower bound gamma / (alpha (1 + gamma)) on centralized inter-event gaps."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in the open interval (0, 1), got {gamma}")
    alpha = spectral_growth_constant(graph, e0_norm, lambda_max, lambda_coefficient)
    return gamma / (alpha * (1.0 + gamma))


@dataclass(frozen=True)
class DistributedZenoBounds:
    """Inter-event lower bounds for one agent.

    tau_star holds for at least one agent of the formation; tau_bar holds for
    every agent whenever the uniform block lower-bound constant epsilon is
    positive (absent otherwise).
    """

    tau_star: float
    tau_bar: float | None


def zeno_bound_distributed(
    params: TriggerParams,
    i: int,
    m: int,
    alpha: float,
    epsilon: float,
    lambda_max: float,
) -> DistributedZenoBounds:
    """Analytic inter-event lower bounds for agent i from supplied run constants."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if m < 1:
        raise ValueError(f"edge count must be >= 1, got {m}")
    rho = float(params.varrho[i - 1])
    sr = math.sqrt(rho)
    tau_star = sr / (alpha * (math.sqrt(m) + sr))
    if epsilon > 0:
        if not lambda_max > 0:
            raise ValueError(f"lambda_max must be > 0, got {lambda_max}")
        tau_bar = sr / (alpha * (math.sqrt(lambda_max / epsilon) + sr))
    else:
        tau_bar = None
    return DistributedZenoBounds(tau_star=tau_star, tau_bar=tau_bar)
