"""
Service module for stick trajectory search.

A stick trajectory is scored by rolling the predictor along it, matching each
goal waypoint to a time in the rollout and summing the weighted waypoint costs.
optimize() improves a seed trajectory with a greedy random walk over the
control points and their times.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from diabolo.exceptions import ConfigError, MatchError
from diabolo.models import DiaboloState, ModelParams, StickPair, Vec3, as_vec3
from diabolo.services.predictor import step
from diabolo.services.trajectory import ControlPoint, StickTrajectory, repair_rows

logger = logging.getLogger(__name__)

# Below this speed the velocity direction is undefined and a direction goal costs pi.
MIN_DIRECTION_SPEED = 1e-9  # m/s

_MAX_TIME_RESAMPLES = 100


@dataclass(frozen=True, eq=False)
class GoalWaypoint:
    """Target diabolo state with one weight per cost term.

    Weights left as None default to 1.0 for goal terms that are present and
    0.0 for absent ones.
    """

    position: Vec3 | None = None
    speed: float | None = None
    direction: Vec3 | None = None
    w_pos: float | None = None
    w_vel: float | None = None
    w_dir: float | None = None

    def __post_init__(self):
        if self.position is None and self.speed is None and self.direction is None:
            raise ConfigError("A waypoint needs at least one of position, speed or direction")
        if self.position is not None:
            object.__setattr__(self, "position", as_vec3(self.position, "waypoint position"))
        if self.speed is not None:
            if not math.isfinite(self.speed) or self.speed < 0:
                raise ConfigError(f"Waypoint speed must be a non-negative number, got {self.speed!r}")
            object.__setattr__(self, "speed", float(self.speed))
        if self.direction is not None:
            direction = as_vec3(self.direction, "waypoint direction")
            norm = float(np.linalg.norm(direction))
            if norm == 0.0:
                raise ConfigError("Waypoint direction must be non-zero")
            object.__setattr__(self, "direction", direction / norm)

        for weight_name, goal in (("w_pos", self.position), ("w_vel", self.speed), ("w_dir", self.direction)):
            weight = getattr(self, weight_name)
            if weight is None:
                weight = 1.0 if goal is not None else 0.0
            if not math.isfinite(weight) or weight < 0:
                raise ConfigError(f"Waypoint {weight_name} must be non-negative, got {weight!r}")
            if goal is None and weight != 0:
                raise ConfigError(f"Waypoint {weight_name} is set but its goal term is absent")
            object.__setattr__(self, weight_name, float(weight))


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the random-walk searches (trajectory optimization and calibration)."""

    iterations: int = 2000
    step_scale_pos: float = 0.02  # m
    step_scale_time: float = 0.02  # s
    seed: int = 0
    samples_per_rollout: int | None = None  # None: every predictor step

    def __post_init__(self):
        if isinstance(self.iterations, bool) or not isinstance(self.iterations, int) or self.iterations <= 0:
            raise ConfigError(f"optimizer.iterations must be a positive integer, got {self.iterations!r}")
        for name in ("step_scale_pos", "step_scale_time"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"optimizer.{name} must be positive, got {value!r}")
        if self.samples_per_rollout is not None and self.samples_per_rollout < 2:
            raise ConfigError(f"optimizer.samples_per_rollout must be at least 2, got {self.samples_per_rollout}")


def stick_samples(traj: StickTrajectory, params: ModelParams) -> list[StickPair]:
    """Stick pairs at every dt of the trajectory, repaired to the string length."""
    steps = int(round(traj.duration / params.dt))
    times = np.minimum(traj.t_start + np.arange(steps + 1) * params.dt, traj.t_end)
    values = repair_rows(traj.sample_array(times), params.l_string)
    return [StickPair.from_array(row) for row in values]


def rollout_sticks(initial: DiaboloState, sticks: Sequence[StickPair], params: ModelParams) -> list[DiaboloState]:
    """Step the predictor through a stick sequence; sticks[0] is the pose at the initial state."""
    states = [initial]
    state = initial
    for sticks_prev, sticks_now in zip(sticks[:-1], sticks[1:], strict=True):
        state, _ = step(state, sticks_prev, sticks_now, params)
        states.append(state)
    return states


def rollout(initial: DiaboloState, traj: StickTrajectory, params: ModelParams) -> list[DiaboloState]:
    """Predicted diabolo states at every dt from the trajectory's start to its end.

    Raises:
        InputError: Propagated from the predictor
    """
    return rollout_sticks(initial, stick_samples(traj, params), params)


def waypoint_cost(state: DiaboloState, wp: GoalWaypoint) -> float:
    """Weighted position, speed and direction cost of a state against a waypoint."""
    cost = 0.0
    if wp.position is not None:
        cost += wp.w_pos * float(np.linalg.norm(state.position - wp.position))

    speed = float(np.linalg.norm(state.velocity))
    if wp.speed is not None:
        cost += wp.w_vel * abs(speed - wp.speed)
    if wp.direction is not None:
        if speed < MIN_DIRECTION_SPEED:
            angle = math.pi
        else:
            angle = math.acos(min(1.0, max(-1.0, float(state.velocity @ wp.direction) / speed)))
        cost += wp.w_dir * angle
    return cost


def _match_distances(states: Sequence[DiaboloState], wp: GoalWaypoint) -> np.ndarray:
    # Waypoints without a position goal are matched on their own cost.
    if wp.position is None:
        return np.array([waypoint_cost(s, wp) for s in states])
    positions = np.array([s.position for s in states])
    return np.linalg.norm(positions - wp.position, axis=1)


def match_indices(states: Sequence[DiaboloState], waypoints: Sequence[GoalWaypoint]) -> list[int]:
    """Rollout index matched to each waypoint, strictly increasing; ties go to the earliest state.

    Raises:
        MatchError: If the rollout is empty or runs out before the last waypoint
    """
    if not states:
        raise MatchError("Cannot match waypoints against an empty rollout")
    indices = []
    start = 0
    for number, wp in enumerate(waypoints, start=1):
        if start >= len(states):
            raise MatchError(f"No time left in the rollout to match waypoint {number} of {len(waypoints)}")
        k = start + int(np.argmin(_match_distances(states[start:], wp)))
        indices.append(k)
        start = k + 1
    return indices


def match_waypoints(states: Sequence[DiaboloState], waypoints: Sequence[GoalWaypoint]) -> list[float]:
    """Time of the rollout state matched to each waypoint."""
    return [states[k].time for k in match_indices(states, waypoints)]


def _subsample(states: list[DiaboloState], samples: int | None) -> list[DiaboloState]:
    if samples is None or samples >= len(states):
        return states
    index = np.unique(np.linspace(0, len(states) - 1, samples).round().astype(int))
    return [states[i] for i in index]


def trajectory_residual(
    initial: DiaboloState,
    traj: StickTrajectory,
    waypoints: Sequence[GoalWaypoint],
    params: ModelParams,
    samples_per_rollout: int | None = None,
) -> float:
    """Sum of matched waypoint costs; infinite when the waypoints cannot be matched."""
    if not waypoints:
        return 0.0
    states = _subsample(rollout(initial, traj, params), samples_per_rollout)
    try:
        indices = match_indices(states, waypoints)
    except MatchError as e:
        logger.debug(f"Rejecting trajectory: {e}")
        return math.inf
    return math.fsum(waypoint_cost(states[k], wp) for k, wp in zip(indices, waypoints, strict=True))


def propose(traj: StickTrajectory, rng: np.random.Generator, cfg: OptimizerConfig) -> StickTrajectory:
    """Perturb one control point (never the first) in position and time."""
    points = list(traj.points)
    k = int(rng.integers(1, len(points)))
    point = points[k]
    left = point.left + rng.normal(0.0, cfg.step_scale_pos, 3)
    right = point.right + rng.normal(0.0, cfg.step_scale_pos, 3)

    lower = points[k - 1].t
    upper = points[k + 1].t if k + 1 < len(points) else math.inf
    t = point.t
    for _ in range(_MAX_TIME_RESAMPLES):
        candidate = point.t + rng.normal(0.0, cfg.step_scale_time)
        if lower < candidate < upper:
            t = candidate
            break

    points[k] = ControlPoint(t, left, right)
    return traj.with_points(points)


def optimize(
    initial: DiaboloState,
    seed_traj: StickTrajectory,
    waypoints: Sequence[GoalWaypoint],
    params: ModelParams,
    cfg: OptimizerConfig,
    progress_callback: Callable[[int, float], None] | None = None,
) -> tuple[StickTrajectory, float, list[float]]:
    """Greedy random-walk search for a stick trajectory that meets the waypoints.

    Args:
        initial: Diabolo state at the start of the trajectory
        seed_traj: Starting trajectory; its first control point is the current stick state
        waypoints: Ordered goal waypoints
        params: Model parameters for the rollouts
        cfg: Iterations, noise scales and seed
        progress_callback: Optional callback(iteration, best_residual) after each iteration

    Returns:
        Tuple of (best trajectory, its residual, best residual after every iteration
        starting with the seed's residual)

    Raises:
        ConfigError: If the seed trajectory has no control point to perturb
    """
    if len(seed_traj.points) < 2:
        raise ConfigError("The seed trajectory needs at least two control points")

    rng = np.random.default_rng(cfg.seed)
    best = seed_traj
    best_residual = trajectory_residual(initial, best, waypoints, params, cfg.samples_per_rollout)
    history = [best_residual]
    logger.info(f"Optimizing {len(waypoints)} waypoints, seed residual {best_residual:.6g}")

    for iteration in range(1, cfg.iterations + 1):
        if best_residual == 0.0:
            logger.info("Waypoints met exactly, stopping early")
            break
        candidate = propose(best, rng, cfg)
        residual = trajectory_residual(initial, candidate, waypoints, params, cfg.samples_per_rollout)
        if residual < best_residual:
            logger.debug(f"Iteration {iteration}: residual {best_residual:.6g} -> {residual:.6g}")
            best, best_residual = candidate, residual
        history.append(best_residual)
        if progress_callback:
            progress_callback(iteration, best_residual)

    logger.info(f"Optimization finished with residual {best_residual:.6g}")
    return best, best_residual, history
