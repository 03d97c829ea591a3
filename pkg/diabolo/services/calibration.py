"""
Service module for fitting model parameters to recorded traces.

The objective is the mean prediction position error over every start instant
and horizon step of every trace, plus an optional weighted rotation-speed error
for traces that carry an omega channel. The friction factors only change the
rotation speed, so they can only be fitted with omega_weight > 0.
"""

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from diabolo.exceptions import ConfigError
from diabolo.models import ModelParams, Trace
from diabolo.services.evaluation import prediction_errors
from diabolo.services.player import OptimizerConfig

logger = logging.getLogger(__name__)

DEFAULT_FREE_PARAMS = ("mu_acc", "mu_dec", "damp_pull_pre", "damp_pull_post", "damp_on_string")
# Parameters that only change omega, never the diabolo position.
ROTATION_PARAMS = ("mu_acc", "mu_dec")

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "mu_acc": (0.0, 1000.0),
    "mu_dec": (0.0, 1000.0),
    "damp_pull_pre": (0.05, 1.0),
    "damp_pull_post": (0.05, 1.0),
    "damp_on_string": (0.99, 1.0),
}

# Share of iterations that draw a coordinate uniformly from its bounds.
GLOBAL_PROPOSAL_RATE = 0.2
# Local proposal width as a fraction of the bounds, shrinking linearly to the floor.
_INITIAL_SCALE = 0.25
_FINAL_SCALE = 0.005


@dataclass(frozen=True, eq=False)
class CalibrationProblem:
    traces: tuple[Trace, ...]
    free_params: tuple[str, ...] = DEFAULT_FREE_PARAMS
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    horizon: float = 2.0  # s
    stride: float = 0.5  # s
    omega_weight: float = 0.0  # m per rad/s

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        object.__setattr__(self, "free_params", tuple(self.free_params))
        known = set(ModelParams.field_names())
        bounds = {}
        for name in self.free_params:
            if name not in known:
                raise ConfigError(f"Unknown model parameter {name!r} in calibration.free_params")
            if name not in self.bounds:
                raise ConfigError(f"No calibration bounds for {name!r}")
            lo, hi = (float(v) for v in self.bounds[name])
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(f"Calibration bounds for {name!r} must be finite with lo < hi, got [{lo}, {hi}]")
            bounds[name] = (lo, hi)
        object.__setattr__(self, "bounds", bounds)
        if len(set(self.free_params)) != len(self.free_params):
            raise ConfigError("calibration.free_params has duplicates")
        if not self.horizon > 0 or not self.stride > 0:
            raise ConfigError(f"Calibration horizon and stride must be positive, got {self.horizon}, {self.stride}")
        if not self.omega_weight >= 0:
            raise ConfigError(f"calibration.omega_weight must be non-negative, got {self.omega_weight}")

    def midpoint(self) -> dict[str, float]:
        return {name: (lo + hi) / 2.0 for name, (lo, hi) in self.bounds.items()}

    @property
    def sees_omega(self) -> bool:
        return self.omega_weight > 0 and any(trace.omega is not None for trace in self.traces)

    def fittable_params(self) -> tuple[str, ...]:
        """Free parameters the objective can tell apart; mu_acc and mu_dec need the omega term."""
        if self.sees_omega:
            return self.free_params
        return tuple(name for name in self.free_params if name not in ROTATION_PARAMS)


def objective(params: ModelParams, problem: CalibrationProblem) -> float:
    """
    Mean prediction error in meters over all traces, start instants and horizon steps.

    Raises:
        ConfigError: If the horizon is shorter than one step
        DataError: If a trace is shorter than the horizon
    """
    if problem.horizon < params.dt:
        raise ConfigError(f"Calibration horizon {problem.horizon} s is shorter than dt={params.dt} s")
    if not problem.traces:
        raise ConfigError("Calibration needs at least one trace")

    terms = []
    count = 0
    for trace in problem.traces:
        errors = prediction_errors(trace, params, problem.horizon, problem.stride)
        # Column 0 is the recorded start state itself.
        position = errors.position[:, 1:]
        terms.extend(position.ravel().tolist())
        if errors.omega is not None and problem.omega_weight > 0:
            terms.extend((problem.omega_weight * errors.omega[:, 1:]).ravel().tolist())
        count += position.size
    return math.fsum(terms) / count if count else 0.0


def _with_values(base: ModelParams, values: Mapping[str, float]) -> ModelParams | None:
    try:
        return replace(base, **values)
    except ConfigError as e:
        logger.debug(f"Skipping invalid parameters {dict(values)}: {e}")
        return None


def fit(
    problem: CalibrationProblem,
    cfg: OptimizerConfig,
    base: ModelParams | None = None,
    progress_callback: Callable[[int, float], None] | None = None,
) -> tuple[ModelParams, float]:
    """
    Coordinate random search over the free parameters, within their bounds.

    The search starts at the midpoint of the bounds. Each iteration changes one
    coordinate (cycling through the free parameters), either drawn uniformly
    from its bounds or from a Gaussian around the current value whose width
    shrinks over the run. A candidate is kept only if it lowers the objective.
mu_acc and mu_dec keep their base values unless the objective sees omega.

    Args:
        problem: Traces, free parameters and bounds
        cfg: Iteration count and seed (the step scales are not used)
        base: Values of the fixed parameters (defaults to ModelParams())
        progress_callback: Optional callback(iteration, best_objective)

    Returns:
        Tuple of (fitted parameters, objective value)

    Raises:
        ConfigError: If the midpoint of the bounds is not a valid parameter set
        DataError: Propagated from the objective
    """
    base = base or ModelParams()
    names = problem.fittable_params()
    skipped = [name for name in problem.free_params if name not in names]
    if skipped:
        logger.warning(
            f"Not fitting {', '.join(skipped)}: they only change omega, which the objective ignores "
            f"without calibration.omega_weight > 0 and an omega channel; keeping the input values"
        )
    if not names:
        value = objective(base, problem)
        logger.info(f"No free parameters, objective {value:.6g} m")
        return base, value

    rng = np.random.default_rng(cfg.seed)
    current = {name: value for name, value in problem.midpoint().items() if name in names}
    best = _with_values(base, current)
    if best is None:
        raise ConfigError(f"The midpoint of the calibration bounds is not a valid parameter set: {current}")
    best_value = objective(best, problem)
    logger.info(f"Calibrating {', '.join(names)}; midpoint objective {best_value:.6g} m")

    for iteration in range(1, cfg.iterations + 1):
        name = names[(iteration - 1) % len(names)]
        lo, hi = problem.bounds[name]
        if rng.random() < GLOBAL_PROPOSAL_RATE:
            proposal = float(rng.uniform(lo, hi))
        else:
            progress = (iteration - 1) / cfg.iterations
            scale = (_INITIAL_SCALE + (_FINAL_SCALE - _INITIAL_SCALE) * progress) * (hi - lo)
            proposal = float(np.clip(current[name] + rng.normal(0.0, scale), lo, hi))

        candidate_values = current | {name: proposal}
        candidate = _with_values(base, candidate_values)
        if candidate is not None:
            value = objective(candidate, problem)
            if value < best_value:
                logger.debug(f"Iteration {iteration}: {name}={proposal:.6g}, objective {value:.6g} m")
                current, best, best_value = candidate_values, candidate, value
        if progress_callback:
            progress_callback(iteration, best_value)

    fitted = ", ".join(f"{name}={current[name]:.6g}" for name in names)
    logger.info(f"Calibration finished: {fitted}, objective {best_value:.6g} m")
    return best, best_value


def free_param_values(params: ModelParams, names: Sequence[str]) -> dict[str, float]:
    return {name: getattr(params, name) for name in names}
