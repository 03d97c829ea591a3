"""
Motion templates and goal patterns.

A motion template bundles an initial diabolo state, a seed stick trajectory
that is known to behave and a default set of goal waypoints. Templates seed the
optimizer, drive synthetic trace generation and initialize the environment.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from diabolo.exceptions import ConfigError, InputError, UnknownPatternError
from diabolo.models import WORLD_X, WORLD_Z, ContactStatus, DiaboloState, ModelParams, StickPair, Vec3, as_vec3
from diabolo.services.geometry import bottom_point, build_spheroid
from diabolo.services.player import GoalWaypoint
from diabolo.services.trajectory import ControlPoint, StickTrajectory, repair_separation

logger = logging.getLogger(__name__)

DEFAULT_STICKS = StickPair(left=(0.0, 0.3, 1.2), right=(0.0, -0.3, 1.2))

STANDARD_GRAVITY = 9.81  # m/s^2

# Relative spread of template amplitudes between generated traces.
AMPLITUDE_VARIATION = 0.1

PATTERNS = ("circular_acceleration", "linear_acceleration", "hop", "throw_up", "swing")

# Stick-tip offsets (left, right) at time t for amplitude A.
Offsets = Callable[[float, float], tuple[NDArray, NDArray]]


def _still(t: float, amplitude: float) -> tuple[NDArray, NDArray]:
    return np.zeros(3), np.zeros(3)


def _swing(t: float, amplitude: float) -> tuple[NDArray, NDArray]:
    offset = amplitude * math.sin(2.0 * math.pi * t / 1.2) * WORLD_X
    return offset, offset


def _saw(t: float, amplitude: float) -> tuple[NDArray, NDArray]:
    offset = amplitude * math.sin(2.0 * math.pi * t / 0.6) * WORLD_Z
    return offset, -offset


def _circle(t: float, amplitude: float) -> tuple[NDArray, NDArray]:
    phase = 2.0 * math.pi * t / 0.8
    right = amplitude * np.array([math.cos(phase) - 1.0, 0.0, math.sin(phase)])
    return np.zeros(3), right


def _hop(t: float, amplitude: float) -> tuple[NDArray, NDArray]:
    lift = amplitude * math.sin(math.pi * t / 0.3) if t < 0.3 else 0.0
    return lift * WORLD_Z, lift * WORLD_Z


@dataclass(frozen=True)
class MotionTemplate:
    """A named seed motion.

    Offsets are added to the template's base stick pose at control points
    spaced knot_spacing apart. When spread_gap is set the base sticks are first
    pulled apart to l_string - spread_gap. FLYING templates start above the stick
    midpoint with launch_speed upwards.
    """

    name: str
    offsets: Offsets
    knot_spacing: float  # s
    amplitude: float = 0.0  # m
    pattern: str | None = None
    goal_scale: float = 0.15  # m
    initial_omega: float = 0.0  # rad/s
    status: ContactStatus = ContactStatus.ON_STRING
    launch_speed: float = 0.0  # m/s
    spread_gap: float | None = None  # m

    @property
    def motion_class(self) -> str:
        return self.name

    def base_sticks(self, sticks: StickPair, params: ModelParams) -> StickPair:
        if self.spread_gap is None:
            return repair_separation(sticks, params.l_string)
        axis = sticks.right - sticks.left
        norm = float(np.linalg.norm(axis))
        axis = axis / norm if norm > 0 else np.array([0.0, -1.0, 0.0])
        half = (params.l_string - self.spread_gap) / 2.0
        return StickPair(sticks.midpoint - half * axis, sticks.midpoint + half * axis)

    def initial_state(
        self, sticks: StickPair, params: ModelParams, rng: np.random.Generator | None = None
    ) -> DiaboloState:
        sticks = self.base_sticks(sticks, params)
        sph = build_spheroid(sticks, params.l_string)
        if self.status is ContactStatus.FLYING:
            speed = self.launch_speed * self._variation(rng)
            return DiaboloState(
                position=sph.center + 0.05 * WORLD_Z,
                velocity=speed * WORLD_Z,
                omega=self.initial_omega,
                status=ContactStatus.FLYING,
            )
        return DiaboloState(position=bottom_point(sph), velocity=np.zeros(3), omega=self.initial_omega)

    def seed_trajectory(
        self,
        sticks: StickPair,
        duration: float,
        params: ModelParams,
        rng: np.random.Generator | None = None,
    ) -> StickTrajectory:
        """Seed trajectory from t=0 to duration.

        With an rng the amplitude varies by up to 10% so that generated traces differ.
        """
        if not duration >= 0:
            raise InputError(f"Duration must be non-negative, got {duration}")
        base = self.base_sticks(sticks, params)
        amplitude = self.amplitude * self._variation(rng)
        times = np.arange(0.0, duration, self.knot_spacing)
        if duration > 0 and (times.size == 0 or duration - times[-1] > 1e-9):
            times = np.append(times, duration)
        elif times.size == 0:
            times = np.array([0.0])
        points = []
        for t in times:
            left, right = self.offsets(float(t), amplitude)
            points.append(ControlPoint(float(t), base.left + left, base.right + right))
        return StickTrajectory(points=tuple(points), l_string=params.l_string)

    def default_goals(self, initial: DiaboloState, scale: float | None = None) -> list[GoalWaypoint]:
        """Goal waypoints around the template's initial position."""
        if self.pattern is None:
            return [GoalWaypoint(position=initial.position)]
        return goal_pattern(self.pattern, initial.position, self.goal_scale if scale is None else scale)

    @staticmethod
    def _variation(rng: np.random.Generator | None) -> float:
        if rng is None:
            return 1.0
        return 1.0 + AMPLITUDE_VARIATION * float(rng.uniform(-1.0, 1.0))


TEMPLATES: dict[str, MotionTemplate] = {
    t.name: t
    for t in (
        MotionTemplate(name="hang", offsets=_still, knot_spacing=0.5),
        MotionTemplate(name="swing", offsets=_swing, knot_spacing=0.3, amplitude=0.12, pattern="swing"),
        MotionTemplate(
            name="linear_acceleration",
            offsets=_saw,
            knot_spacing=0.15,
            amplitude=0.12,
            pattern="linear_acceleration",
            initial_omega=20.0,
        ),
        MotionTemplate(
            name="circular_acceleration",
            offsets=_circle,
            knot_spacing=0.1,
            amplitude=0.1,
            pattern="circular_acceleration",
            initial_omega=20.0,
        ),
        MotionTemplate(name="hop", offsets=_hop, knot_spacing=0.075, amplitude=0.2, pattern="hop", goal_scale=0.1),
        MotionTemplate(
            name="throw",
            offsets=_still,
            knot_spacing=0.5,
            pattern="throw_up",
            goal_scale=0.5,
            initial_omega=20.0,
            status=ContactStatus.FLYING,
            launch_speed=3.0,
            spread_gap=0.02,
        ),
    )
}


def get_template(name: str) -> MotionTemplate:
    """
    Raises:
        UnknownPatternError: If there is no template with that name
    """
    try:
        return TEMPLATES[name]
    except KeyError:
        raise UnknownPatternError(f"Unknown motion template {name!r}, expected one of {', '.join(TEMPLATES)}") from None


def goal_pattern(name: str, center: Vec3, scale: float) -> list[GoalWaypoint]:
    """
    Goal waypoints for a named motion.

    circular_acceleration: four points on a vertical circle (x-z plane) of radius
        scale about center at 0, 90, 180 and 270 degrees, heading counter-clockwise
    linear_acceleration: stay at center, then be at rest there
    hop: at rest scale above center, then back at center
    throw_up: moving straight up fast enough to rise scale meters (center unused)
    swing: scale forward of center, then scale behind it

    Raises:
        UnknownPatternError: If name is not one of PATTERNS
        ConfigError: If scale is not positive
    """
    center = as_vec3(center, "pattern center")
    if not scale > 0:
        raise ConfigError(f"Pattern scale must be positive, got {scale}")

    if name == "circular_acceleration":
        waypoints = []
        for angle in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
            radial = np.array([math.cos(angle), 0.0, math.sin(angle)])
            tangent = np.array([-math.sin(angle), 0.0, math.cos(angle)])
            waypoints.append(GoalWaypoint(position=center + scale * radial, direction=tangent, w_dir=0.1))
        return waypoints
    if name == "linear_acceleration":
        return [GoalWaypoint(position=center), GoalWaypoint(position=center, speed=0.0)]
    if name == "hop":
        return [GoalWaypoint(position=center + scale * WORLD_Z, speed=0.0), GoalWaypoint(position=center)]
    if name == "throw_up":
        return [GoalWaypoint(speed=math.sqrt(2.0 * STANDARD_GRAVITY * scale), direction=WORLD_Z)]
    if name == "swing":
        return [GoalWaypoint(position=center + scale * WORLD_X), GoalWaypoint(position=center - scale * WORLD_X)]
    raise UnknownPatternError(f"Unknown goal pattern {name!r}, expected one of {', '.join(PATTERNS)}")
