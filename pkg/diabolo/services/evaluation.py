"""
Service module for prediction-error metrics against recorded traces.

From each start instant (one every `stride` seconds) the predictor is seeded
with the recorded diabolo state and driven by the recorded stick positions for
`horizon` seconds. Position errors are then averaged over the start instants.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from diabolo.exceptions import ConfigError, DataError, InputError
from diabolo.models import ContactStatus, DiaboloState, ErrorCurve, ModelParams, StickPair, Trace
from diabolo.services.geometry import build_spheroid, signed_distance
from diabolo.services.predictor import step
from diabolo.services.traces import resample
from diabolo.services.trajectory import repair_rows

logger = logging.getLogger(__name__)

STATISTICS = ("mean", "terminal")
UNLABELLED = "unlabelled"

# Relative mismatch between the sample spacing and dt that still counts as aligned.
_ALIGNMENT_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class PredictionErrors:
    """Per start instant and horizon step errors; row i starts at sample starts[i]."""

    starts: NDArray
    horizons: NDArray  # s
    position: NDArray  # m, shape (len(starts), len(horizons))
    omega: NDArray | None  # rad/s, same shape; None without an omega channel


def params_for_trace(params: ModelParams, trace: Trace) -> ModelParams:
    """Use the trace's recorded string length in place of the configured one."""
    if math.isclose(params.l_string, trace.meta.l_string, rel_tol=0.0, abs_tol=1e-12):
        return params
    logger.debug(f"Using the trace's string length {trace.meta.l_string} m instead of {params.l_string} m")
    return replace(params, l_string=trace.meta.l_string)


def infer_status(sticks: StickPair, position, params: ModelParams) -> ContactStatus:
    """Contact status implied by the signed distance and the loose/flying thresholds.

    A diabolo more than c_loose outside the spheroid cannot be held by the
    string and counts as FLYING; closer than that is capture noise on a taut string.
    """
    s = signed_distance(build_spheroid(sticks, params.l_string), np.asarray(position))
    if s < -params.c_loose:
        return ContactStatus.FLYING
    if s <= params.c_loose:
        return ContactStatus.ON_STRING
    if s <= params.c_flying:
        return ContactStatus.OFF_STRING_LOOSE
    return ContactStatus.FLYING


def stick_pairs(trace: Trace, l_string: float) -> list[StickPair]:
    """Recorded stick poses, pulled back to the string length where capture noise overstretches it."""
    values = repair_rows(np.hstack([trace.left, trace.right]), l_string)
    return [StickPair.from_array(row) for row in values]


def initial_state_from_trace(
    trace: Trace, index: int, params: ModelParams, sticks: StickPair | None = None
) -> DiaboloState:
    """
    Recover a predictor state from sample `index` of a trace.

    Ground-truth channels are used when present. Otherwise the velocity is a
    forward difference (backward at the last sample), omega is 0 and the status
    is inferred from the signed distance.
    """
    if not 0 <= index < len(trace):
        raise InputError(f"Sample {index} is outside the trace (0..{len(trace) - 1})")

    if trace.velocity is not None:
        velocity = trace.velocity[index]
    elif len(trace) < 2:
        velocity = np.zeros(3)
    else:
        a, b = (index, index + 1) if index + 1 < len(trace) else (index - 1, index)
        velocity = (trace.diabolo[b] - trace.diabolo[a]) / (trace.t[b] - trace.t[a])

    if trace.status is not None:
        status = trace.status[index]
    else:
        if sticks is None:
            sticks = stick_pairs(trace, params.l_string)[index]
        status = infer_status(sticks, trace.diabolo[index], params)

    omega = float(trace.omega[index]) if trace.omega is not None else 0.0
    return DiaboloState(
        position=trace.diabolo[index],
        velocity=velocity,
        omega=omega,
        status=status,
        time=float(trace.t[index]),
    )


def aligned(trace: Trace, params: ModelParams) -> Trace:
    """The trace itself when its samples are dt apart, otherwise a resampled copy."""
    if len(trace) < 2 or abs(trace.sample_interval - params.dt) <= _ALIGNMENT_TOLERANCE * params.dt:
        return trace
    logger.info(f"Resampling trace from {trace.sample_interval * 1e3:.3f} ms to dt={params.dt * 1e3:.3f} ms")
    return resample(trace, params.dt)


def prediction_errors(trace: Trace, params: ModelParams, horizon: float, stride: float) -> PredictionErrors:
    """
    Predict forward from every start instant and collect per-step errors.

    Args:
        trace: Recorded or synthetic trace
        params: Model parameters; the string length comes from the trace
        horizon: Prediction window in seconds
        stride: Spacing of start instants in seconds

    Raises:
        ConfigError: If horizon is negative or stride is not positive
        DataError: If the trace is shorter than the horizon
    """
    if not horizon >= 0:
        raise ConfigError(f"Horizon must be non-negative, got {horizon}")
    if not stride > 0:
        raise ConfigError(f"Stride must be positive, got {stride}")

    params = params_for_trace(params, trace)
    trace = aligned(trace, params)
    steps = int(round(horizon / params.dt))
    stride_steps = max(1, int(round(stride / params.dt)))
    starts = np.arange(0, len(trace) - steps, stride_steps)
    if starts.size == 0:
        raise DataError(
            f"Trace of {trace.duration:.3f} s is too short for a {horizon:.3f} s horizon "
            f"({len(trace)} samples at dt={params.dt})"
        )

    sticks = stick_pairs(trace, params.l_string)
    position = np.zeros((starts.size, steps + 1))
    omega = np.zeros((starts.size, steps + 1)) if trace.omega is not None else None

    for row, start in enumerate(starts):
        state = initial_state_from_trace(trace, int(start), params, sticks[start])
        for k in range(1, steps + 1):
            i = start + k
            state, _ = step(state, sticks[i - 1], sticks[i], params)
            position[row, k] = np.linalg.norm(state.position - trace.diabolo[i])
            if omega is not None:
                omega[row, k] = abs(state.omega - trace.omega[i])

    logger.debug(f"Predicted from {starts.size} start instants over {steps} steps")
    return PredictionErrors(
        starts=starts,
        horizons=np.arange(steps + 1) * params.dt,
        position=position,
        omega=omega,
    )


def error_evolution(trace: Trace, params: ModelParams, horizon: float, stride: float) -> ErrorCurve:
    """Mean position error against prediction horizon, averaged over start instants.

    Raises:
        DataError: If the trace is shorter than the horizon
    """
    errors = prediction_errors(trace, params, horizon, stride)
    return ErrorCurve(
        horizons=errors.horizons,
        errors=errors.position.mean(axis=0),
        start_count=int(errors.starts.size),
    )


def motion_class_report(
    traces: Sequence[Trace],
    params: ModelParams,
    horizon: float,
    stride: float = 0.5,
    statistic: str = "mean",
) -> pd.DataFrame:
    """
    Average prediction error per motion class.

    Each trace contributes one value: the mean of its error curve over the whole
    horizon ("mean") or the error at the horizon ("terminal").

    Returns:
        DataFrame with columns motion_class, mean_error (m) and traces, sorted by class
    """
    if statistic not in STATISTICS:
        raise ConfigError(f"Unknown statistic {statistic!r}, expected one of {', '.join(STATISTICS)}")
    labelled = [(trace.meta.motion_class, error_evolution(trace, params, horizon, stride)) for trace in traces]
    return summarize_curves(labelled, statistic)


def summarize_curves(labelled: Sequence[tuple[str, ErrorCurve]], statistic: str = "mean") -> pd.DataFrame:
    """Group (motion class, error curve) pairs into the per-class report."""
    if statistic not in STATISTICS:
        raise ConfigError(f"Unknown statistic {statistic!r}, expected one of {', '.join(STATISTICS)}")

    rows = []
    for label, curve in labelled:
        value = curve.mean_error if statistic == "mean" else curve.terminal_error
        rows.append({"motion_class": label or UNLABELLED, "error": value})
        logger.info(f"{label or UNLABELLED}: {statistic} error {value:.4f} m")

    if not rows:
        return pd.DataFrame({"motion_class": [], "mean_error": [], "traces": []})
    frame = pd.DataFrame(rows)
    return (
        frame.groupby("motion_class", sort=True)
        .agg(mean_error=("error", "mean"), traces=("error", "size"))
        .reset_index()
    )
