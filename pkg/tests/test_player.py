"""Tests for waypoint costs, waypoint matching and the trajectory optimizer."""

import math

import numpy as np
import pytest

from diabolo.exceptions import ConfigError, MatchError
from diabolo.factories import (
    DiaboloStateFactory,
    FlyingStateFactory,
    GoalWaypointFactory,
    OptimizerConfigFactory,
)
from diabolo.models import ModelParams
from diabolo.services.player import (
    GoalWaypoint,
    OptimizerConfig,
    match_indices,
    match_waypoints,
    optimize,
    propose,
    rollout,
    stick_samples,
    trajectory_residual,
    waypoint_cost,
)
from diabolo.services.predictor import ballistic_position
from diabolo.services.templates import DEFAULT_STICKS, get_template
from diabolo.services.trajectory import ControlPoint, StickTrajectory, constant_trajectory


def line_of_states(count=5):
    """States one meter apart along x, one second apart."""
    return [DiaboloStateFactory(position=(float(i), 0, 0), time=float(i)) for i in range(count)]


@pytest.fixture
def moving_sticks():
    return StickTrajectory(
        points=(
            ControlPoint(0.0, (0, 0.3, 1.2), (0, -0.3, 1.2)),
            ControlPoint(0.3, (0.05, 0.3, 1.25), (0.05, -0.3, 1.15)),
            ControlPoint(0.6, (0, 0.3, 1.2), (0, -0.3, 1.2)),
        ),
        l_string=1.45,
    )


class TestGoalWaypoint:
    """Test waypoint validation and weight defaults."""

    def test_present_terms_default_to_unit_weight(self):
        wp = GoalWaypoint(position=(0, 0, 1), speed=2.0)

        assert (wp.w_pos, wp.w_vel, wp.w_dir) == (1.0, 1.0, 0.0)

    def test_direction_is_normalized(self):
        wp = GoalWaypoint(direction=(0, 0, 5))

        np.testing.assert_array_equal(wp.direction, [0, 0, 1])

    def test_needs_a_goal(self):
        with pytest.raises(ConfigError, match="at least one"):
            GoalWaypoint()

    def test_weight_without_goal(self):
        with pytest.raises(ConfigError, match="w_dir"):
            GoalWaypoint(position=(0, 0, 1), w_dir=1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [{"speed": -1.0}, {"direction": (0, 0, 0)}, {"position": (0, 0, 1), "w_pos": -1}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            GoalWaypoint(**kwargs)


class TestOptimizerConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"iterations": 0}, {"iterations": 1.5}, {"step_scale_pos": 0.0}, {"samples_per_rollout": 1}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            OptimizerConfig(**kwargs)


class TestWaypointCost:
    """Test the weighted waypoint cost terms."""

    def test_goal_met(self):
        state = DiaboloStateFactory(position=(0, 0, 1), velocity=(0, 0, 2))
        wp = GoalWaypoint(position=(0, 0, 1), speed=2.0, direction=(0, 0, 1))

        assert waypoint_cost(state, wp) == 0.0

    def test_opposite_direction(self):
        state = DiaboloStateFactory(velocity=(0, 0, -1))

        assert waypoint_cost(state, GoalWaypoint(direction=(0, 0, 1))) == pytest.approx(math.pi)

    def test_weighted_position(self):
        """Test a (3, 4, 0) m miss at w_pos = 2 costs 10."""
        state = DiaboloStateFactory(position=(3, 4, 1))

        assert waypoint_cost(state, GoalWaypoint(position=(0, 0, 1), w_pos=2.0)) == pytest.approx(10.0)

    def test_speed_magnitude_only(self):
        state = DiaboloStateFactory(velocity=(3, 4, 0))

        assert waypoint_cost(state, GoalWaypoint(speed=2.0, w_vel=0.5)) == pytest.approx(1.5)

    def test_direction_undefined_at_rest(self):
        """Test a direction goal against a resting diabolo costs pi."""
        state = DiaboloStateFactory(velocity=(0, 0, 0))

        assert waypoint_cost(state, GoalWaypoint(direction=(1, 0, 0), w_dir=2.0)) == pytest.approx(2 * math.pi)

    def test_non_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            state = DiaboloStateFactory(position=rng.normal(size=3), velocity=rng.normal(size=3))
            wp = GoalWaypoint(position=rng.normal(size=3), speed=1.0, direction=rng.normal(size=3))
            assert waypoint_cost(state, wp) >= 0.0


class TestMatchWaypoints:
    """Test matching waypoints to rollout times."""

    def test_exact_position(self):
        assert match_waypoints(line_of_states(), [GoalWaypoint(position=(2, 0, 0))]) == [2.0]

    def test_identical_waypoints_are_ordered(self):
        wp = GoalWaypoint(position=(2, 0, 0))

        assert match_waypoints(line_of_states(), [wp, wp]) == [2.0, 3.0]

    def test_tie_goes_to_earliest(self):
        assert match_waypoints(line_of_states(), [GoalWaypoint(position=(1.5, 0, 0))]) == [1.0]

    def test_first_match_searches_whole_rollout(self):
        """Test later waypoints only search after the previous match."""
        waypoints = [GoalWaypoint(position=(3, 0, 0)), GoalWaypoint(position=(0, 0, 0))]

        assert match_indices(line_of_states(), waypoints) == [3, 4]

    def test_no_time_left(self):
        wp = GoalWaypoint(position=(4, 0, 0))

        with pytest.raises(MatchError):
            match_waypoints(line_of_states(), [wp, wp])

    def test_empty_rollout(self):
        with pytest.raises(MatchError):
            match_waypoints([], [GoalWaypointFactory()])

    def test_strictly_increasing(self):
        rng = np.random.default_rng(1)
        states = line_of_states(50)
        waypoints = [GoalWaypoint(position=rng.uniform(0, 50, 3) * [1, 0, 0]) for _ in range(10)]

        times = match_waypoints(states, waypoints)

        assert all(b > a for a, b in zip(times, times[1:], strict=False))
        assert times[0] >= 0.0 and times[-1] <= 49.0


class TestRollout:
    """Test predictor rollouts along stick trajectories."""

    def test_zero_length(self, params, hanging):
        states = rollout(hanging, constant_trajectory(DEFAULT_STICKS, 0.0), params)

        assert states == [hanging]

    def test_one_state_per_step(self, params, hanging, moving_sticks):
        states = rollout(hanging, moving_sticks, params)

        assert len(states) == round(0.6 / params.dt) + 1
        assert states[-1].time == pytest.approx(0.6)
        assert len(stick_samples(moving_sticks, params)) == len(states)

    def test_flying_ignores_sticks(self, params, moving_sticks):
        """Test a FLYING rollout is the ballistic recurrence whatever the sticks do."""
        state = FlyingStateFactory(velocity=(0.3, 0.0, 5.0))

        states = rollout(state, moving_sticks, params)

        for k, s in enumerate(states):
            np.testing.assert_allclose(s.position, ballistic_position(state, k, params), rtol=1e-12)

    def test_hang_drift(self, hanging):
        """Test a diabolo hanging under still sticks moves less than 1 mm in a second."""
        params = ModelParams()

        states = rollout(hanging, constant_trajectory(DEFAULT_STICKS, 1.0), params)

        assert np.linalg.norm(states[-1].position - hanging.position) < 1e-3


class TestTrajectoryResidual:
    def test_no_waypoints(self, params, hanging, moving_sticks):
        assert trajectory_residual(hanging, moving_sticks, [], params) == 0.0

    def test_unmatchable(self, params, hanging):
        """Test more waypoints than rollout states gives an infinite residual."""
        wp = GoalWaypointFactory()

        assert trajectory_residual(hanging, constant_trajectory(DEFAULT_STICKS, 0.0), [wp, wp], params) == math.inf

    def test_subsampled(self, params, hanging, moving_sticks):
        wp = GoalWaypoint(position=hanging.position)

        assert trajectory_residual(hanging, moving_sticks, [wp], params, samples_per_rollout=10) == 0.0


class TestPropose:
    def test_anchor_and_order(self, moving_sticks):
        """Test proposals never move the first control point and keep the times ordered."""
        rng = np.random.default_rng(3)
        cfg = OptimizerConfigFactory(step_scale_time=0.5)

        for _ in range(200):
            candidate = propose(moving_sticks, rng, cfg)

            first = candidate.points[0]
            assert first.t == 0.0
            np.testing.assert_array_equal(first.as_array(), moving_sticks.points[0].as_array())
            assert np.all(np.diff(candidate.knots) > 0)

    def test_deterministic(self, moving_sticks):
        cfg = OptimizerConfigFactory()

        a = propose(moving_sticks, np.random.default_rng(9), cfg)
        b = propose(moving_sticks, np.random.default_rng(9), cfg)

        np.testing.assert_array_equal([p.as_array() for p in a.points], [p.as_array() for p in b.points])
        np.testing.assert_array_equal(a.knots, b.knots)


class TestOptimize:
    """Test the random-walk trajectory search."""

    def test_goal_met_by_seed(self, params, hanging, moving_sticks):
        """Test a seed that already meets the waypoints is returned unchanged."""
        best, residual, history = optimize(
            hanging, moving_sticks, [GoalWaypoint(position=hanging.position)], params, OptimizerConfigFactory()
        )

        assert best is moving_sticks
        assert residual == 0.0
        assert history == [0.0]

    def test_needs_two_control_points(self, params, hanging):
        single = StickTrajectory(points=(ControlPoint(0.0, DEFAULT_STICKS.left, DEFAULT_STICKS.right),))

        with pytest.raises(ConfigError):
            optimize(hanging, single, [GoalWaypointFactory()], params, OptimizerConfigFactory())

    def test_history_and_anchor(self, params, hanging, moving_sticks):
        goal = [GoalWaypoint(position=hanging.position + [0.05, 0, 0.02])]
        calls = []

        best, residual, history = optimize(
            hanging,
            moving_sticks,
            goal,
            params,
            OptimizerConfigFactory(iterations=20, seed=4),
            progress_callback=lambda i, r: calls.append((i, r)),
        )

        assert len(history) == 21
        assert history[-1] == residual
        assert all(b <= a for a, b in zip(history, history[1:], strict=False))
        assert [i for i, _ in calls] == list(range(1, 21))
        np.testing.assert_array_equal(best.points[0].as_array(), moving_sticks.points[0].as_array())
        assert residual == pytest.approx(trajectory_residual(hanging, best, goal, params))

    def test_reproducible(self, params, hanging, moving_sticks):
        goal = [GoalWaypoint(position=hanging.position + [0.05, 0, 0.02])]
        cfg = OptimizerConfigFactory(iterations=15, seed=21)

        first = optimize(hanging, moving_sticks, goal, params, cfg)
        second = optimize(hanging, moving_sticks, goal, params, cfg)

        assert first[1] == second[1]
        assert first[2] == second[2]
        np.testing.assert_array_equal(first[0].knots, second[0].knots)
        np.testing.assert_array_equal(
            [p.as_array() for p in first[0].points], [p.as_array() for p in second[0].points]
        )

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_history_non_increasing(self, params, hanging, moving_sticks, seed):
        goal = [GoalWaypoint(position=hanging.position + [0.05, 0, 0.02]), GoalWaypoint(position=hanging.position)]

        _, _, history = optimize(hanging, moving_sticks, goal, params, OptimizerConfigFactory(iterations=10, seed=seed))

        assert all(b <= a for a, b in zip(history, history[1:], strict=False))

    @pytest.mark.slow
    def test_swing_waypoint(self, params):
        """Test a position reachable by swinging the sticks is approached by at least half."""
        template = get_template("swing")
        initial = template.initial_state(DEFAULT_STICKS, params)
        seed_traj = template.seed_trajectory(DEFAULT_STICKS, 1.2, params)
        goal = [GoalWaypoint(position=initial.position + [0.25, 0.0, 0.02])]

        _, residual, history = optimize(initial, seed_traj, goal, params, OptimizerConfig(iterations=2000, seed=0))

        assert residual < 0.5 * history[0]

    @pytest.mark.slow
    def test_circular_acceleration_closed_loop(self, params):
        """Test the four-goal circle halves the seed residual and spins the diabolo up."""
        template = get_template("circular_acceleration")
        initial = template.initial_state(DEFAULT_STICKS, params)
        seed_traj = template.seed_trajectory(DEFAULT_STICKS, 1.6, params)
        goals = template.default_goals(initial)

        best, residual, history = optimize(initial, seed_traj, goals, params, OptimizerConfig(iterations=2000, seed=0))
        states = rollout(initial, best, params)

        assert residual < 0.5 * history[0]
        assert states[-1].omega > states[0].omega
