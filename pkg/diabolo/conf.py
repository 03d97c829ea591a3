"""
Configuration loading for the diabolo commands.

Settings are layered, later layers winning key by key:

1. dataclass defaults
2. ``settings.DIABOLO`` (a dict of sections, same shape as the TOML file)
3. the TOML file given with ``--config``
4. environment variables ``DIABOLO_<SECTION>__<KEY>``, parsed as TOML values
   (falling back to a plain string), e.g. ``DIABOLO_MODEL__DT=0.002``

Command-line flags are applied by the commands on top of the result. Unknown
sections and keys are errors.
"""

import logging
import os
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from django.conf import settings

from diabolo.exceptions import ConfigError, DiaboloError
from diabolo.models import ModelParams, StickPair
from diabolo.services.calibration import DEFAULT_BOUNDS, DEFAULT_FREE_PARAMS, CalibrationProblem
from diabolo.services.environment import EnvConfig
from diabolo.services.evaluation import STATISTICS
from diabolo.services.player import GoalWaypoint, OptimizerConfig
from diabolo.services.templates import DEFAULT_STICKS, goal_pattern

logger = logging.getLogger(__name__)

ENV_PREFIX = "DIABOLO_"


@dataclass(frozen=True)
class EvaluationSettings:
    horizon: float = 2.0  # s
    stride: float = 0.5  # s
    statistic: str = "mean"
    smoothing_window: int = 0  # samples, 0 or 1 disables smoothing

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ConfigError(f"evaluation.statistic must be one of {', '.join(STATISTICS)}, got {self.statistic!r}")
        if not self.horizon >= 0 or not self.stride > 0:
            raise ConfigError("evaluation.horizon must be non-negative and evaluation.stride positive")
        if not isinstance(self.smoothing_window, int) or self.smoothing_window < 0:
            raise ConfigError(
                f"evaluation.smoothing_window must be a non-negative integer, got {self.smoothing_window}"
            )


@dataclass(frozen=True)
class CalibrationSettings:
    free_params: tuple[str, ...] = DEFAULT_FREE_PARAMS
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    horizon: float = 2.0  # s
    stride: float = 0.5  # s
    omega_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "free_params", tuple(self.free_params))
        merged = dict(DEFAULT_BOUNDS)
        for name, pair in dict(self.bounds).items():
            if not isinstance(pair, list | tuple) or len(pair) != 2:
                raise ConfigError(f"calibration.bounds.{name} must be [lo, hi], got {pair!r}")
            merged[name] = (float(pair[0]), float(pair[1]))
        object.__setattr__(self, "bounds", merged)


@dataclass(frozen=True)
class EnvSettings:
    action_mode: str = "velocity"
    action_bounds: float = 1.5
    episode_horizon: int = 2000
    initial_noise: float = 0.0


@dataclass(frozen=True)
class TraceSettings:
    diabolo: str = "Red"


_SECTION_TYPES: dict[str, type] = {
    "model": ModelParams,
    "optimizer": OptimizerConfig,
    "evaluation": EvaluationSettings,
    "calibration": CalibrationSettings,
    "env": EnvSettings,
    "trace": TraceSettings,
}

SECTIONS: dict[str, frozenset[str]] = {
    name: frozenset(f.name for f in fields(cls)) for name, cls in _SECTION_TYPES.items()
} | {"sticks": frozenset({"left", "right"})}


@dataclass(frozen=True, eq=False)
class DiaboloConfig:
    model: ModelParams = field(default_factory=ModelParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sticks: StickPair = DEFAULT_STICKS
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    env: EnvSettings = field(default_factory=EnvSettings)
    trace: TraceSettings = field(default_factory=TraceSettings)
    source: Path | None = None

    def env_config(self, template: str = "hang") -> EnvConfig:
        return EnvConfig(
            params=self.model,
            sticks_init=self.sticks,
            template=template,
            action_mode=self.env.action_mode,
            action_bounds=self.env.action_bounds,
            episode_horizon=self.env.episode_horizon,
            initial_noise=self.env.initial_noise,
        )

    def calibration_problem(self, traces, horizon: float | None = None, stride: float | None = None):
        cal = self.calibration
        return CalibrationProblem(
            traces=tuple(traces),
            free_params=cal.free_params,
            bounds=cal.bounds,
            horizon=cal.horizon if horizon is None else horizon,
            stride=cal.stride if stride is None else stride,
            omega_weight=cal.omega_weight,
        )

    def with_seed(self, seed: int | None) -> "DiaboloConfig":
        if seed is None:
            return self
        return replace(self, optimizer=replace(self.optimizer, seed=seed))


def unknown_keys(data: Mapping[str, Any]) -> list[str]:
    """Dotted names of sections and keys that the configuration does not know."""
    unknown = []
    for section, values in data.items():
        if section not in SECTIONS:
            unknown.append(section)
            continue
        if not isinstance(values, Mapping):
            unknown.append(f"{section} (not a table)")
            continue
        unknown.extend(f"{section}.{key}" for key in values if key not in SECTIONS[section])
    return unknown


def _merge(base: dict[str, dict[str, Any]], layer: Mapping[str, Any], source: str) -> None:
    problems = unknown_keys(layer)
    if problems:
        raise ConfigError(f"Unknown configuration keys in {source}: {', '.join(problems)}")
    for section, values in layer.items():
        target = base.setdefault(section, {})
        for key, value in values.items():
            if key == "bounds" and isinstance(value, Mapping):
                target[key] = {**target.get(key, {}), **value}
            else:
                target[key] = value


def _parse_env_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        return raw


def env_overrides(environ: Mapping[str, str]) -> dict[str, dict[str, Any]]:
    """Nested overrides from DIABOLO_<SECTION>__<KEY> variables."""
    overrides: dict[str, dict[str, Any]] = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, _, key = name[len(ENV_PREFIX) :].partition("__")
        overrides.setdefault(section.lower(), {})[key.lower()] = _parse_env_value(raw)
        logger.debug(f"Config override from environment: {section.lower()}.{key.lower()}")
    return overrides


def read_toml(path) -> dict[str, Any]:
    """
    Raises:
        ConfigError: If the file is missing or is not valid TOML
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e


def _django_settings() -> Mapping[str, Any]:
    if not settings.configured:
        return {}
    return getattr(settings, "DIABOLO", {}) or {}


def load_config(path=None, environ: Mapping[str, str] | None = None, use_settings: bool = True) -> DiaboloConfig:
    """
    Build the effective configuration.

    Args:
        path: Optional TOML config file
        environ: Environment to read overrides from (defaults to os.environ)
        use_settings: Whether to include settings.DIABOLO

    Raises:
        ConfigError: For missing files, invalid TOML, unknown keys or invalid values
    """
    merged: dict[str, dict[str, Any]] = {}
    if use_settings:
        _merge(merged, _django_settings(), "settings.DIABOLO")
    if path is not None:
        _merge(merged, read_toml(path), str(path))
    _merge(merged, env_overrides(os.environ if environ is None else environ), "environment")

    sections: dict[str, Any] = {}
    try:
        for name, cls in _SECTION_TYPES.items():
            sections[name] = cls(**merged.get(name, {}))
        stick_values = merged.get("sticks", {})
        sections["sticks"] = StickPair(
            left=stick_values.get("left", DEFAULT_STICKS.left),
            right=stick_values.get("right", DEFAULT_STICKS.right),
        )
    except ConfigError:
        raise
    except (DiaboloError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration: {e}") from e

    config = DiaboloConfig(**sections, source=Path(path) if path is not None else None)
    logger.info(f"Loaded configuration from {path or 'defaults'}")
    return config


_WAYPOINT_KEYS = frozenset(f.name for f in fields(GoalWaypoint))
_PATTERN_KEYS = frozenset({"name", "center", "scale"})


def load_goals(path, default_center) -> list[GoalWaypoint]:
    """
    Read a goals file: either a ``[[waypoints]]`` array or a ``[pattern]`` table.

    Args:
        path: TOML goals file
        default_center: Pattern center used when the pattern table has none

    Raises:
        ConfigError: If the file is missing, malformed, or names an unknown pattern
    """
    data = read_toml(path)
    has_waypoints = "waypoints" in data
    has_pattern = "pattern" in data
    if has_waypoints == has_pattern:
        raise ConfigError(f"{path}: expected exactly one of [[waypoints]] or [pattern]")
    extra = set(data) - {"waypoints", "pattern"}
    if extra:
        raise ConfigError(f"{path}: unknown tables {', '.join(sorted(extra))}")

    try:
        if has_pattern:
            pattern = data["pattern"]
            unknown = set(pattern) - _PATTERN_KEYS
            if unknown:
                raise ConfigError(f"{path}: unknown pattern keys {', '.join(sorted(unknown))}")
            if "name" not in pattern:
                raise ConfigError(f"{path}: [pattern] needs a name")
            waypoints = goal_pattern(pattern["name"], pattern.get("center", default_center), pattern.get("scale", 0.15))
        else:
            waypoints = []
            for number, entry in enumerate(data["waypoints"], start=1):
                unknown = set(entry) - _WAYPOINT_KEYS
                if unknown:
                    raise ConfigError(f"{path}: waypoint {number} has unknown keys {', '.join(sorted(unknown))}")
                waypoints.append(GoalWaypoint(**entry))
    except ConfigError:
        raise
    except (DiaboloError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e

    logger.info(f"Loaded {len(waypoints)} goal waypoints from {path}")
    return waypoints


def dumps_model(params: ModelParams, comments: Mapping[str, Any] | None = None) -> str:
    """Serialize model parameters as a [model] TOML table loadable with --config."""
    lines = [f"# {key} = {value}" for key, value in (comments or {}).items()]
    lines.append("[model]")
    lines.extend(f"{name} = {getattr(params, name)!r}" for name in ModelParams.field_names())
    return "\n".join(lines) + "\n"
