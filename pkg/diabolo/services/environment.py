"""
Learning-environment interface over the predictor.

DiaboloEnv alternates reset() and step(action). An action moves both stick
tips: in "velocity" mode it is a stick-tip velocity (left xyz, right xyz) held
for one timestep, in "absolute" mode it is the next stick-tip position. Actions
are clamped to the configured bounds and the result is pulled back to the
string length when needed. No reward is built in; pass reward_fn to fill
StepInfo.reward.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from diabolo.exceptions import ConfigError, InputError, NotResetError
from diabolo.models import ContactStatus, DiaboloState, ModelParams, StepDiagnostics, StickPair, Trace, TraceMeta
from diabolo.services.predictor import step
from diabolo.services.templates import DEFAULT_STICKS, get_template
from diabolo.services.traces import trace_from_states
from diabolo.services.trajectory import repair_separation

logger = logging.getLogger(__name__)

ACTION_MODES = ("velocity", "absolute")

_STATUS_INDEX = {status: index for index, status in enumerate(ContactStatus)}


@dataclass(frozen=True, eq=False)
class EnvConfig:
    """Environment settings.

    action_bounds is in m/s for velocity actions and in meters around the initial
    stick pose for absolute actions. initial defaults to the template's initial
    state for sticks_init.
    """

    params: ModelParams = field(default_factory=ModelParams)
    initial: DiaboloState | None = None
    sticks_init: StickPair = DEFAULT_STICKS
    template: str = "hang"
    action_mode: str = "velocity"
    action_bounds: float = 1.5
    episode_horizon: int = 2000  # steps
    initial_noise: float = 0.0  # m, std of the position noise added on reset

    def __post_init__(self):
        if self.action_mode not in ACTION_MODES:
            raise ConfigError(f"env.action_mode must be one of {', '.join(ACTION_MODES)}, got {self.action_mode!r}")
        if not self.action_bounds > 0:
            raise ConfigError(f"env.action_bounds must be positive, got {self.action_bounds}")
        if isinstance(self.episode_horizon, bool) or not isinstance(self.episode_horizon, int):
            raise ConfigError(f"env.episode_horizon must be an integer, got {self.episode_horizon!r}")
        if self.episode_horizon <= 0:
            raise ConfigError(f"env.episode_horizon must be positive, got {self.episode_horizon}")
        if not self.initial_noise >= 0:
            raise ConfigError(f"env.initial_noise must be non-negative, got {self.initial_noise}")
        get_template(self.template)


@dataclass(frozen=True, eq=False)
class Observation:
    position: NDArray
    velocity: NDArray
    omega: float
    status: ContactStatus
    sticks: StickPair
    time_fraction: float

    def as_array(self) -> NDArray:
        """Flat vector: position, velocity, omega, status index, left, right, time fraction."""
        return np.concatenate(
            [
                self.position,
                self.velocity,
                [self.omega, float(_STATUS_INDEX[self.status])],
                self.sticks.left,
                self.sticks.right,
                [self.time_fraction],
            ]
        )


@dataclass(frozen=True, eq=False)
class StepInfo:
    diagnostics: StepDiagnostics
    action_clamped: bool
    reward: float | None = None


RewardFn = Callable[[DiaboloState, StickPair, StepDiagnostics], float]


class DiaboloEnv:
    """Single-sequence environment; run one instance per concurrent episode."""

    def __init__(self, cfg: EnvConfig | None = None, reward_fn: RewardFn | None = None):
        self.cfg = cfg or EnvConfig()
        self.reward_fn = reward_fn
        self._state: DiaboloState | None = None
        self._sticks: StickPair | None = None
        self._steps = 0
        self._states: list[DiaboloState] = []
        self._poses: list[StickPair] = []

    @property
    def state(self) -> DiaboloState | None:
        return self._state

    @property
    def sticks(self) -> StickPair | None:
        return self._sticks

    @property
    def done(self) -> bool:
        return self._steps >= self.cfg.episode_horizon

    def reset(self, seed: int | None = None) -> Observation:
        """
        Start a new episode.

        Raises:
            ConfigError: If the initial sticks are further apart than the string
        """
        cfg = self.cfg
        if cfg.sticks_init.separation > cfg.params.l_string:
            raise ConfigError(
                f"Initial sticks are {cfg.sticks_init.separation:.4f} m apart, "
                f"more than the {cfg.params.l_string} m string"
            )
        rng = np.random.default_rng(seed)
        if cfg.initial is not None:
            initial = cfg.initial
        else:
            initial = get_template(cfg.template).initial_state(cfg.sticks_init, cfg.params)
        if cfg.initial_noise > 0:
            initial = DiaboloState(
                position=initial.position + rng.normal(0.0, cfg.initial_noise, 3),
                velocity=initial.velocity,
                omega=initial.omega,
                status=initial.status,
                time=initial.time,
            )

        self._state = initial
        self._sticks = cfg.sticks_init
        self._steps = 0
        self._states = [initial]
        self._poses = [cfg.sticks_init]
        logger.debug(f"Reset episode (seed={seed}) with the diabolo at {initial.position.tolist()}")
        return self._observe()

    def _target_sticks(self, action) -> tuple[StickPair, bool]:
        cfg = self.cfg
        action = np.asarray(action, dtype=np.float64).reshape(6)
        if not np.all(np.isfinite(action)):
            raise InputError(f"Action has non-finite components: {action.tolist()}")
        current = self._sticks.as_array()
        if cfg.action_mode == "velocity":
            clipped = np.clip(action, -cfg.action_bounds, cfg.action_bounds)
            target = current + clipped * cfg.params.dt
        else:
            home = cfg.sticks_init.as_array()
            clipped = np.clip(action, home - cfg.action_bounds, home + cfg.action_bounds)
            target = clipped
        clamped = bool(np.any(clipped != action))

        sticks = StickPair.from_array(target)
        if sticks.separation > cfg.params.l_string:
            sticks = repair_separation(sticks, cfg.params.l_string)
            clamped = True
        return sticks, clamped

    def step(self, action) -> tuple[Observation, StepInfo, bool]:
        """
        Apply one action and advance the predictor by one timestep.

        Returns:
            Tuple of (observation, info, done)

        Raises:
            NotResetError: If reset() has not been called or the episode is over
        """
        if self._state is None:
            raise NotResetError("Call reset() before step()")
        if self.done:
            raise NotResetError("The episode is over; call reset() to start a new one")

        sticks_now, clamped = self._target_sticks(action)
        state, diagnostics = step(self._state, self._sticks, sticks_now, self.cfg.params)
        self._state = state
        self._sticks = sticks_now
        self._steps += 1
        self._states.append(state)
        self._poses.append(sticks_now)

        reward = self.reward_fn(state, sticks_now, diagnostics) if self.reward_fn else None
        return self._observe(), StepInfo(diagnostics=diagnostics, action_clamped=clamped, reward=reward), self.done

    def _observe(self) -> Observation:
        state = self._state
        return Observation(
            position=state.position,
            velocity=state.velocity,
            omega=state.omega,
            status=state.status,
            sticks=self._sticks,
            time_fraction=self._steps / self.cfg.episode_horizon,
        )

    def recording(self, diabolo: str = "Red") -> Trace:
        """The episode so far as a ground-truth trace.

        Raises:
            NotResetError: If no episode has been started
        """
        if self._state is None:
            raise NotResetError("No episode to record; call reset() first")
        meta = TraceMeta(
            diabolo=diabolo,
            l_string=self.cfg.params.l_string,
            sample_rate=1.0 / self.cfg.params.dt,
            motion_class=self.cfg.template,
        )
        return trace_from_states(self._states, self._poses, meta)
