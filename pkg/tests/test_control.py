import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigidsim.control import (
    HeldControl,
    agent_block,
    centralized_held_control,
    delta_centralized,
    delta_distributed,
    distributed_held_control,
    gradient_blocks,
    instantaneous_control,
)
from rigidsim.rigidity import (
    FormationGraph,
    FormationState,
    distance_errors,
    rigidity_matrix,
)
from rigidsim.scenario import parse_scenario

import oracles


def target_triangle_state():
    g = FormationGraph(n=3, edges=((1, 2), (1, 3), (2, 3)), targets=(2.0,) * 3, dim=2)
    state = FormationState([0.0, 0.0, 2.0, 0.0, 1.0, np.sqrt(3.0)])
    return g, state


class TestInstantaneousControl:
    def test_zero_at_target_shape(self):
        g = FormationGraph(n=2, edges=((1, 2),), targets=(5.0,), dim=2)
        u = instantaneous_control(g, FormationState([0.0, 0.0, 3.0, 4.0]))
        assert np.array_equal(u, np.zeros(4))

    def test_single_edge_pushes_agents_apart(self):
        # e = 1 - 4 = -3; expanding the single rigidity row gives
        # R^T e = [3, 0, -3, 0], so u = -R^T e = [-3, 0, 3, 0]: the agents
        # separate along the edge, as a negative error demands.
        g = FormationGraph(n=2, edges=((1, 2),), targets=(2.0,), dim=2)
        u = instantaneous_control(g, FormationState([0.0, 0.0, 1.0, 0.0]))
        np.testing.assert_allclose(u, [-3.0, 0.0, 3.0, 0.0], rtol=0, atol=0)

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, edges, targets, dim, p = oracles.random_framework(rng)
        g = FormationGraph(n=n, edges=edges, targets=targets, dim=dim)
        u = instantaneous_control(g, FormationState(p))
        expected = -oracles.gradient_dense(n, edges, targets, dim, p)
        scale = max(1.0, np.abs(expected).max())
        assert np.abs(u - expected).max() < 1e-12 * scale


class TestCentralizedHeldControl:
    def test_zero_at_target(self):
        g, state = target_triangle_state()
        held = centralized_held_control(g, state)
        assert np.abs(held.value).max() < 1e-12

    def test_bench_initial_value(self):
        s = parse_scenario("paper-centralized")
        held = centralized_held_control(s.graph, s.initial)
        expected = -oracles.gradient_dense(
            s.graph.n, s.graph.edges, s.graph.targets, 3, s.initial.positions
        )
        np.testing.assert_allclose(held.value, expected, atol=1e-12)
        assert held.held_since == 0.0
        assert held.source_state == s.initial

    def test_idempotent_resample(self):
        s = parse_scenario("paper-centralized")
        a = centralized_held_control(s.graph, s.initial)
        b = centralized_held_control(s.graph, s.initial)
        assert np.array_equal(a.value, b.value)

    def test_held_since_must_match_snapshot(self):
        with pytest.raises(ValueError):
            HeldControl(value=np.zeros(4), held_since=1.0, source_state=FormationState([0.0] * 4))


class TestDeltaCentralized:
    def test_zero_when_current_equals_snapshot(self):
        s = parse_scenario("paper-centralized")
        d = delta_centralized(s.graph, s.initial, s.initial)
        assert np.array_equal(d, np.zeros(15))

    def test_zero_along_stationary_target_trajectory(self):
        g, state = target_triangle_state()
        # held control is zero at the target shape, so the state never moves
        later = FormationState(state.positions, time=3.0)
        assert np.abs(delta_centralized(g, state, later)).max() < 1e-12

    def test_one_euler_step_matches_two_term_evaluation(self):
        s = parse_scenario("paper-centralized")
        u = instantaneous_control(s.graph, s.initial)
        h = 1e-3
        moved = FormationState(s.initial.positions + h * u, time=h)
        d = delta_centralized(s.graph, s.initial, moved)
        g0 = oracles.gradient_dense(
            s.graph.n, s.graph.edges, s.graph.targets, 3, s.initial.positions
        )
        g1 = oracles.gradient_dense(
            s.graph.n, s.graph.edges, s.graph.targets, 3, moved.positions
        )
        np.testing.assert_allclose(d, g0 - g1, atol=1e-12)


class TestAgentBlock:
    def test_isolated_agent_zero(self):
        g = FormationGraph(n=3, edges=((1, 2),), targets=(1.0,), dim=2)
        state = FormationState([0.0, 0.0, 3.0, 0.0, 9.0, 9.0])
        R = rigidity_matrix(g, state)
        e = distance_errors(g, state)
        assert np.array_equal(agent_block(g, R, e, 3), np.zeros(2))

    def test_triangle_agent_one_expansion(self):
        g, _ = target_triangle_state()
        rng = np.random.default_rng(3)
        state = FormationState(rng.normal(size=6))
        R = rigidity_matrix(g, state)
        e = distance_errors(g, state)
        P = state.grid(2)
        expected = (P[0] - P[1]) * e[0] + (P[0] - P[2]) * e[1]
        np.testing.assert_allclose(agent_block(g, R, e, 1), expected, atol=1e-12)

    def test_stacked_blocks_reproduce_gradient_bitwise(self):
        s = parse_scenario("paper-centralized")
        R = rigidity_matrix(s.graph, s.initial)
        e = distance_errors(s.graph, s.initial)
        stacked = np.concatenate([agent_block(s.graph, R, e, i) for i in range(1, 6)])
        full = gradient_blocks(s.graph, s.initial.grid(3)).ravel()
        assert np.array_equal(stacked, full)

    def test_bad_index_rejected(self):
        g, state = target_triangle_state()
        R = rigidity_matrix(g, state)
        e = distance_errors(g, state)
        with pytest.raises(ValueError):
            agent_block(g, R, e, 0)
        with pytest.raises(ValueError):
            agent_block(g, R, e, 4)


class TestDistributedHeldControl:
    def test_zero_when_incident_errors_vanish(self):
        g, state = target_triangle_state()
        held = distributed_held_control(g, state, 2)
        assert np.abs(held.value).max() < 1e-12

    def test_simultaneous_snapshots_stack_to_centralized(self):
        s = parse_scenario("paper-centralized")
        stacked = np.concatenate(
            [distributed_held_control(s.graph, s.initial, i).value for i in range(1, 6)]
        )
        assert np.array_equal(stacked, instantaneous_control(s.graph, s.initial))

    def test_bench_agent_four_against_block_oracle(self):
        s = parse_scenario("paper-distributed")
        held = distributed_held_control(s.graph, s.initial, 4)
        R = rigidity_matrix(s.graph, s.initial)
        e = distance_errors(s.graph, s.initial)
        np.testing.assert_allclose(held.value, -agent_block(s.graph, R, e, 4), atol=0)


class TestDeltaDistributed:
    def test_zero_at_snapshot(self):
        s = parse_scenario("paper-distributed")
        for i in (1, 3, 5):
            d = delta_distributed(s.graph, s.initial, s.initial, i)
            assert np.array_equal(d, np.zeros(3))

    def test_simultaneous_stacking_matches_centralized(self):
        s = parse_scenario("paper-distributed")
        rng = np.random.default_rng(11)
        current = FormationState(s.initial.positions + 0.01 * rng.normal(size=15), time=0.5)
        stacked = np.concatenate(
            [delta_distributed(s.graph, s.initial, current, i) for i in range(1, 6)]
        )
        assert np.array_equal(stacked, delta_centralized(s.graph, s.initial, current))

    def test_mid_trajectory_two_term_evaluation(self):
        s = parse_scenario("paper-distributed")
        u = instantaneous_control(s.graph, s.initial)
        moved = FormationState(s.initial.positions + 5e-3 * u, time=5e-3)
        d = delta_distributed(s.graph, s.initial, moved, 2)
        g0 = oracles.gradient_dense(5, s.graph.edges, s.graph.targets, 3, s.initial.positions)
        g1 = oracles.gradient_dense(5, s.graph.edges, s.graph.targets, 3, moved.positions)
        np.testing.assert_allclose(d, (g0 - g1)[3:6], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_se_equivariance_of_controls(seed):
    rng = np.random.default_rng(seed)
    n, edges, targets, dim, p = oracles.random_framework(rng)
    g = FormationGraph(n=n, edges=edges, targets=targets, dim=dim)
    Q = oracles.random_rotation(rng, dim)
    theta = rng.normal(size=dim)

    state = FormationState(p)
    moved = FormationState((state.grid(dim) @ Q.T + theta).ravel())

    # distance errors are invariant
    scale = max(1.0, np.abs(p).max() ** 2)
    assert np.abs(distance_errors(g, moved) - distance_errors(g, state)).max() < 1e-9 * scale

    # controls rotate blockwise: u(Qp + theta) = (I kron Q) u(p)
    u = instantaneous_control(g, state).reshape(n, dim)
    u_moved = instantaneous_control(g, moved).reshape(n, dim)
    assert np.abs(u_moved - u @ Q.T).max() < 1e-9 * max(1.0, np.abs(u).max())

    # deviations transform the same way
    q = p + rng.normal(scale=0.1, size=p.size)
    current = FormationState(q, time=1.0)
    current_moved = FormationState((current.grid(dim) @ Q.T + theta).ravel(), time=1.0)
    dlt = delta_centralized(g, state, current).reshape(n, dim)
    dlt_moved = delta_centralized(g, moved, current_moved).reshape(n, dim)
    assert np.abs(dlt_moved - dlt @ Q.T).max() < 1e-9 * max(1.0, np.abs(dlt).max())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_control_blocks_sum_to_zero(seed):
    # the centralized law moves nothing in the mean: centroid is conserved
    rng = np.random.default_rng(seed)
    n, edges, targets, dim, p = oracles.random_framework(rng)
    g = FormationGraph(n=n, edges=edges, targets=targets, dim=dim)
    u = instantaneous_control(g, FormationState(p)).reshape(n, dim)
    scale = max(1.0, np.abs(u).max())
    assert np.abs(u.sum(axis=0)).max() < 1e-9 * scale


def test_zero_error_fixed_point():
    g, state = target_triangle_state()
    held = centralized_held_control(g, state)
    assert np.abs(held.value).max() < 1e-12
    # an Euler step under that control leaves the state in place
    assert np.abs(state.positions + 0.1 * held.value - state.positions).max() < 1e-13
