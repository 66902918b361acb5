"""Event-triggered rigid formation control: simulation and verification."""

from .analysis import (
    build_report,
    centroid_drift,
    fd_jacobian_oracle,
    fit_decay_rate,
    inter_event_stats,
    measure_epsilon,
    se_invariance_check,
)
from .control import (
    HeldControl,
    agent_block,
    centralized_held_control,
    delta_centralized,
    delta_distributed,
    distributed_held_control,
    gradient_blocks,
    instantaneous_control,
)
from .engine import (
    CONTROLLER_KINDS,
    DivergenceError,
    EventLog,
    EventRecord,
    Scenario,
    SimulationTrace,
    refine_event_time,
    run,
    step_once,
)
from .rigidity import (
    FormationGraph,
    FormationState,
    RigidityMatrix,
    build_incidence,
    distance_errors,
    grammian_eigen_bounds,
    is_minimally_infinitesimally_rigid,
    relative_positions,
    rigidity_function,
    rigidity_matrix,
    rigidity_rank,
)
from .scenario import (
    PRESETS,
    ScenarioError,
    double_tetrahedron_graph,
    dumps_scenario,
    parse_scenario,
    preset_names,
    save_scenario,
)
from .triggers import (
    GLOBAL,
    DistributedZenoBounds,
    TriggerParams,
    TriggerState,
    centralized_event_value,
    distributed_event_value,
    fire_and_reset,
    modified_event_value,
    zeno_bound_centralized,
    zeno_bound_distributed,
)

__version__ = "0.1.0"
