"""Value types shared by the diabolo services.

Everything in here is immutable: dataclasses are frozen and the numpy arrays
they hold are flagged read-only, so states and traces can be handed between
rollouts without copying.
"""

import logging
import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Any, NotRequired, TypedDict

import numpy as np
from numpy.typing import NDArray

from diabolo.exceptions import ConfigError, EmptyTraceError, InputError, TraceFormatError

logger = logging.getLogger(__name__)

# Positions in meters, velocities in m/s. World x points forward, z up.
Vec3 = NDArray[np.float64]

WORLD_X = np.array([1.0, 0.0, 0.0])
WORLD_Y = np.array([0.0, 1.0, 0.0])
WORLD_Z = np.array([0.0, 0.0, 1.0])


def as_vec3(value: Any, name: str = "vector") -> Vec3:
    """Convert value to a read-only, finite float64 array of shape (3,).

    Raises:
        InputError: If the value is not three finite numbers
    """
    try:
        arr = np.array(value, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name} is not a 3-vector: {value!r}") from e
    if arr.shape != (3,):
        raise InputError(f"{name} must have 3 components, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite components: {arr.tolist()}")
    arr.flags.writeable = False
    return arr


def _readonly(arr: NDArray, dtype=np.float64) -> NDArray:
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


class DiaboloSpec(TypedDict):
    """Physical characteristics of a recorded diabolo."""

    weight_g: float
    diameter_mm: float
    length_mm: float
    axle_bearing: bool


DIABOLO_CATALOG: dict[str, DiaboloSpec] = {
    "Red": {"weight_g": 284.5, "diameter_mm": 127, "length_mm": 143, "axle_bearing": False},
    "Blue": {"weight_g": 289.5, "diameter_mm": 127, "length_mm": 143, "axle_bearing": True},
    "Patterned": {"weight_g": 218.0, "diameter_mm": 97, "length_mm": 114, "axle_bearing": False},
    "Green": {"weight_g": 141.5, "diameter_mm": 82, "length_mm": 93, "axle_bearing": False},
}


@dataclass(frozen=True, eq=False)
class StickPair:
    """The two stick-tip positions at one instant."""

    left: Vec3
    right: Vec3

    def __post_init__(self):
        object.__setattr__(self, "left", as_vec3(self.left, "left stick"))
        object.__setattr__(self, "right", as_vec3(self.right, "right stick"))

    @property
    def midpoint(self) -> Vec3:
        return (self.left + self.right) / 2.0

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.right - self.left))

    def as_array(self) -> NDArray:
        return np.concatenate([self.left, self.right])

    @classmethod
    def from_array(cls, values: NDArray) -> "StickPair":
        values = np.asarray(values, dtype=np.float64).reshape(6)
        return cls(values[:3], values[3:])


@dataclass(frozen=True, eq=False)
class Spheroid:
    """Auxiliary spheroid: foci at the stick tips, focal sum equal to the string length."""

    center: Vec3
    axis_dir: Vec3
    a: float
    b: float


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical constants of the analytical model.

    Damping factors are per step, so calibrated values only hold for the dt
    they were fitted at.
    """

    l_string: float = 1.45  # m
    mu_acc: float = 200.0  # rad/m
    mu_dec: float = 20.0  # rad/m
    damp_pull_pre: float = 0.5
    damp_pull_post: float = 0.5
    damp_on_string: float = 0.9999
    c_loose: float = 0.01  # m
    c_flying: float = 0.05  # m
    throw_gap: float = 0.05  # m below l_string
    dt: float = 0.001  # s
    gravity: float = 9.81  # m/s^2

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, int | float) or not math.isfinite(value):
                raise ConfigError(f"model.{f.name} must be a finite number, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        if self.l_string <= 0:
            raise ConfigError(f"model.l_string must be positive, got {self.l_string}")
        if self.dt <= 0:
            raise ConfigError(f"model.dt must be positive, got {self.dt}")
        if self.c_loose >= self.c_flying:
            raise ConfigError(f"model.c_loose ({self.c_loose}) must be below model.c_flying ({self.c_flying})")
        for name in ("damp_pull_pre", "damp_pull_post", "damp_on_string"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"model.{name} must be in (0, 1], got {value}")
        if self.throw_gap < 0 or self.throw_gap >= self.l_string:
            raise ConfigError(f"model.throw_gap must be in [0, l_string), got {self.throw_gap}")
        if self.mu_acc < 0 or self.mu_dec < 0:
            raise ConfigError("model.mu_acc and model.mu_dec must be non-negative")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @property
    def gravity_vector(self) -> Vec3:
        return np.array([0.0, 0.0, -self.gravity])


class ContactStatus(Enum):
    """Contact state of the diabolo with the string."""

    ON_STRING = "ON_STRING"
    OFF_STRING_LOOSE = "OFF_STRING_LOOSE"
    FLYING = "FLYING"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class DiaboloState:
    """Point-mass state of the diabolo."""

    position: Vec3
    velocity: Vec3
    omega: float = 0.0  # rad/s
    status: ContactStatus = ContactStatus.ON_STRING
    time: float = 0.0  # s

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "diabolo position"))
        object.__setattr__(self, "velocity", as_vec3(self.velocity, "diabolo velocity"))
        if not (math.isfinite(self.omega) and math.isfinite(self.time)):
            raise InputError(f"omega and time must be finite, got {self.omega!r}, {self.time!r}")
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "status", ContactStatus(self.status))


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    """Intermediate quantities of one predictor step.

    v_pull is the undamped, uncapped pull velocity; v_pull_capped is the value
    after the pre-cap damping and the cap. cap is |v_ellipse_origin + v_ellipse_edge|
    and capped tells whether the cap was binding. cut_plane_active is only set on
    ON_STRING steps that applied the cut plane; LOOSE and FLYING steps report False
    whatever the stick separation.
    """

    v_pull: Vec3
    v_pull_capped: Vec3
    v_ellipse_origin: Vec3
    v_ellipse_edge: Vec3
    s: float
    cut_plane_active: bool
    delta_string: float
    cap: float = 0.0
    capped: bool = False
    projected: bool = False


@dataclass(frozen=True)
class TraceMeta:
    """Metadata block of a trace file."""

    diabolo: str = "Red"
    l_string: float = 1.45  # m
    sample_rate: float = 1000.0  # Hz
    motion_class: str = ""


@dataclass(frozen=True, eq=False)
class Trace:
    """A recorded or synthetic sequence of stick and diabolo positions.

    omega, velocity and status are optional ground-truth channels; synthetic
    traces carry all of them, motion-capture recordings usually none.
    """

    meta: TraceMeta
    t: NDArray
    left: NDArray
    right: NDArray
    diabolo: NDArray
    omega: NDArray | None = None
    velocity: NDArray | None = None
    status: tuple[ContactStatus, ...] | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        t = _readonly(self.t).reshape(-1)
        n = t.shape[0]
        if n == 0:
            raise EmptyTraceError("Trace has no samples")
        if np.any(np.diff(t) <= 0):
            raise TraceFormatError("Trace timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        for name in ("left", "right", "diabolo"):
            arr = _readonly(getattr(self, name)).reshape(n, 3)
            object.__setattr__(self, name, arr)
        if self.omega is not None:
            object.__setattr__(self, "omega", _readonly(self.omega).reshape(n))
        if self.velocity is not None:
            object.__setattr__(self, "velocity", _readonly(self.velocity).reshape(n, 3))
        if self.status is not None:
            status = tuple(ContactStatus(s) for s in self.status)
            if len(status) != n:
                raise TraceFormatError(f"status channel has {len(status)} entries for {n} samples")
            object.__setattr__(self, "status", status)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def sample_interval(self) -> float:
        """Median spacing between samples (falls back to the nominal rate for one sample)."""
        if len(self) < 2:
            return 1.0 / self.meta.sample_rate
        return float(np.median(np.diff(self.t)))

    def sticks(self, index: int) -> StickPair:
        return StickPair(self.left[index], self.right[index])


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """Mean prediction position error as a function of the prediction horizon."""

    horizons: NDArray  # s
    errors: NDArray  # m
    start_count: int

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    @property
    def terminal_error(self) -> float:
        return float(self.errors[-1])


class RunManifest(TypedDict):
    """Reproducibility record written next to every command output.

    Only started_at and duration_s change between identical runs.
    """

    command: str
    config: str | None
    inputs: list[str]
    outputs: list[str]
    seed: int | None
    version: str
    started_at: str
    duration_s: float
    extra: NotRequired[dict[str, Any]]
