"""Synthetic ground-truth traces from motion templates."""

import logging

import numpy as np

from diabolo.models import ModelParams, StickPair, Trace, TraceMeta
from diabolo.services.player import rollout_sticks, stick_samples
from diabolo.services.templates import DEFAULT_STICKS, MotionTemplate
from diabolo.services.traces import trace_from_states

logger = logging.getLogger(__name__)


def generate_synthetic(
    template: MotionTemplate,
    params: ModelParams,
    duration: float,
    seed: int | None = 0,
    sticks: StickPair = DEFAULT_STICKS,
    diabolo: str = "Red",
) -> Trace:
    """
    Roll the predictor along a template's seed trajectory and record every step.

    The trace carries the full predictor state (omega, velocity, status) so
    evaluating it with the same parameters reproduces it exactly.

    Args:
        template: Motion template to run
        params: Model parameters; samples are params.dt apart
        duration: Length of the trace in seconds
        seed: Seed for the template's amplitude variation; None runs the nominal template
        sticks: Base stick pose
        diabolo: Diabolo name for the trace metadata
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    initial = template.initial_state(sticks, params, rng)
    traj = template.seed_trajectory(sticks, duration, params, rng)
    poses = stick_samples(traj, params)
    states = rollout_sticks(initial, poses, params)
    meta = TraceMeta(
        diabolo=diabolo,
        l_string=params.l_string,
        sample_rate=1.0 / params.dt,
        motion_class=template.motion_class,
    )
    logger.info(f"Generated {len(states)} samples of {template.name} (seed={seed})")
    return trace_from_states(states, poses, meta)
