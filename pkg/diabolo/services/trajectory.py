"""Piece-wise cubic stick trajectories through timed control points."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from diabolo.exceptions import InputError, TimeRangeError
from diabolo.models import StickPair, Vec3, as_vec3

logger = logging.getLogger(__name__)

# Separation the sticks are pulled back to when a sample would overstretch the string.
SEPARATION_MARGIN = 1e-3  # m

_TIME_TOLERANCE = 1e-9  # s


@dataclass(frozen=True, eq=False)
class ControlPoint:
    """Stick-tip positions the trajectory passes through at time t."""

    t: float
    left: Vec3
    right: Vec3

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise InputError(f"Control point time must be finite, got {self.t!r}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "left", as_vec3(self.left, "left control point"))
        object.__setattr__(self, "right", as_vec3(self.right, "right control point"))

    @property
    def sticks(self) -> StickPair:
        return StickPair(self.left, self.right)

    def as_array(self) -> NDArray:
        return np.concatenate([self.left, self.right])


def _zero_velocity() -> NDArray:
    return np.zeros(6)


@dataclass(frozen=True, eq=False)
class StickTrajectory:
    """Per-axis cubic spline through the control points of both stick tips.

    The spline is clamped: its derivative at the first point equals
    start_velocity (left xyz then right xyz, m/s) and is zero at the last point.
    When l_string is set, samples that would overstretch the string are repaired.
    """

    points: tuple[ControlPoint, ...]
    start_velocity: NDArray = field(default_factory=_zero_velocity)
    l_string: float | None = None

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise InputError("A trajectory needs at least one control point")
        times = np.array([p.t for p in points])
        if np.any(np.diff(times) <= 0):
            raise InputError(f"Control point times must be strictly increasing, got {times.tolist()}")
        velocity = np.array(self.start_velocity, dtype=np.float64).reshape(6)
        if not np.all(np.isfinite(velocity)):
            raise InputError("Trajectory start velocity must be finite")
        velocity.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "start_velocity", velocity)

    @property
    def t_start(self) -> float:
        return self.points[0].t

    @property
    def t_end(self) -> float:
        return self.points[-1].t

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @cached_property
    def knots(self) -> NDArray:
        return np.array([p.t for p in self.points])

    @cached_property
    def _values(self) -> NDArray:
        return np.array([p.as_array() for p in self.points])

    @cached_property
    def _spline(self) -> CubicSpline | None:
        if len(self.points) < 2:
            return None
        return CubicSpline(
            self.knots,
            self._values,
            axis=0,
            bc_type=((1, self.start_velocity), (1, np.zeros(6))),
        )

    def with_points(self, points: Sequence[ControlPoint]) -> "StickTrajectory":
        return StickTrajectory(points=tuple(points), start_velocity=self.start_velocity, l_string=self.l_string)

    def sample_array(self, times: NDArray) -> NDArray:
        """Sample stick positions at many times. Returns an array of shape (len(times), 6)."""
        times = np.asarray(times, dtype=np.float64).reshape(-1)
        if times.size and (times.min() < self.t_start - _TIME_TOLERANCE or times.max() > self.t_end + _TIME_TOLERANCE):
            raise TimeRangeError(
                f"Sample times [{times.min():.6f}, {times.max():.6f}] leave the trajectory span "
                f"[{self.t_start:.6f}, {self.t_end:.6f}]"
            )
        times = np.clip(times, self.t_start, self.t_end)
        if self._spline is None:
            values = np.repeat(self._values, times.size, axis=0)
        else:
            values = self._spline(times)
            # Exact values at the knots.
            index = np.searchsorted(self.knots, times)
            index = np.minimum(index, len(self.knots) - 1)
            on_knot = self.knots[index] == times
            values[on_knot] = self._values[index[on_knot]]
        if self.l_string is not None:
            values = repair_rows(values, self.l_string)
        return values


def repair_separation_array(values: NDArray, l_string: float, margin: float = SEPARATION_MARGIN) -> NDArray:
    """Scale a (left, right) row about its midpoint when the sticks overstretch the string."""
    left = values[:3]
    right = values[3:]
    separation = float(np.linalg.norm(right - left))
    if separation <= l_string:
        return values
    midpoint = (left + right) / 2.0
    scale = (l_string - margin) / separation
    return np.concatenate([midpoint + (left - midpoint) * scale, midpoint + (right - midpoint) * scale])


def repair_rows(values: NDArray, l_string: float) -> NDArray:
    """Repair every overstretched row of an (n, 6) array of stick positions in place."""
    separation = np.linalg.norm(values[:, 3:] - values[:, :3], axis=1)
    overstretched = separation > l_string
    if np.any(overstretched):
        logger.debug(f"Repairing {int(overstretched.sum())} overstretched stick samples")
        values[overstretched] = [repair_separation_array(row, l_string) for row in values[overstretched]]
    return values


def repair_separation(sticks: StickPair, l_string: float, margin: float = SEPARATION_MARGIN) -> StickPair:
    """Return sticks pulled together to l_string - margin if they are further apart than l_string."""
    if sticks.separation <= l_string:
        return sticks
    logger.debug(f"Repairing stick separation {sticks.separation:.4f} m > {l_string:.4f} m")
    return StickPair.from_array(repair_separation_array(sticks.as_array(), l_string, margin))


def sample_trajectory(traj: StickTrajectory, t: float, l_string: float | None = None) -> StickPair:
    """Stick positions at time t.

    Args:
        traj: Trajectory to sample
        t: Time in seconds, within [t_start, t_end]
        l_string: Optional string length for separation repair (defaults to traj.l_string)

    Raises:
        TimeRangeError: If t is outside the trajectory's time span
    """
    values = traj.sample_array(np.array([t]))[0]
    sticks = StickPair.from_array(values)
    if l_string is not None:
        sticks = repair_separation(sticks, l_string)
    return sticks


def constant_trajectory(sticks: StickPair, duration: float, l_string: float | None = None) -> StickTrajectory:
    """Sticks held still for `duration` seconds starting at t=0."""
    points = [ControlPoint(0.0, sticks.left, sticks.right)]
    if duration > 0:
        points.append(ControlPoint(duration, sticks.left, sticks.right))
    return StickTrajectory(points=tuple(points), l_string=l_string)
