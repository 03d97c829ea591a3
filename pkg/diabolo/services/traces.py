"""
Service module for reading and writing trace files.

A trace file is delimited text with a `# key=value` metadata block at the top
and the header `t,lx,ly,lz,rx,ry,rz,dx,dy,dz`, optionally followed by the
ground-truth columns `omega`, `vx,vy,vz` and `status`:

    # diabolo=Red
    # l_string=1.45
    # sample_rate=1000
    # motion_class=swing
    t,lx,ly,lz,rx,ry,rz,dx,dy,dz,omega
    0,0,0.3,1.2,0,-0.3,1.2,0,0,0.54,0
"""

import io
import logging
from collections.abc import Sequence
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.ndimage import uniform_filter1d

from diabolo.exceptions import EmptyTraceError, InputError, TraceFormatError
from diabolo.fileutils import atomic_write_text
from diabolo.models import DIABOLO_CATALOG, ContactStatus, DiaboloState, ErrorCurve, StickPair, Trace, TraceMeta
from diabolo.services.trajectory import ControlPoint, StickTrajectory

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("t", "lx", "ly", "lz", "rx", "ry", "rz", "dx", "dy", "dz")
VELOCITY_COLUMNS = ("vx", "vy", "vz")

# Capture noise tolerated on top of the string length before a sample is flagged.
SEPARATION_SLACK = 0.02  # m
# Allowed deviation of the sample spacing from the nominal rate.
JITTER_TOLERANCE = 0.01

FLOAT_FORMAT = "%.12g"

_META_TYPES = {f.name: f.type for f in fields(TraceMeta)}


def _parse_meta(lines: list[str], path) -> TraceMeta:
    values = {}
    for line in lines:
        body = line.lstrip("#").strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            logger.warning(f"{path}: ignoring metadata line without '=': {line.strip()!r}")
            continue
        if key not in _META_TYPES:
            logger.warning(f"{path}: ignoring unknown metadata key {key!r}")
            continue
        if _META_TYPES[key] in (float, "float"):
            try:
                values[key] = float(value)
            except ValueError as e:
                raise TraceFormatError(f"{path}: metadata {key}={value!r} is not a number") from e
        else:
            values[key] = value

    meta = TraceMeta(**values)
    if meta.l_string <= 0 or meta.sample_rate <= 0:
        raise TraceFormatError(f"{path}: l_string and sample_rate must be positive")
    if meta.diabolo not in DIABOLO_CATALOG:
        logger.warning(f"{path}: diabolo {meta.diabolo!r} is not one of {', '.join(DIABOLO_CATALOG)}")
    return meta


def _check_header(header: list[str], path) -> None:
    if tuple(header[: len(REQUIRED_COLUMNS)]) != REQUIRED_COLUMNS:
        raise TraceFormatError(f"{path}: header must start with {','.join(REQUIRED_COLUMNS)}, got {','.join(header)}")
    extra = header[len(REQUIRED_COLUMNS) :]
    if len(set(header)) != len(header):
        raise TraceFormatError(f"{path}: duplicate columns in header")
    velocity = [c for c in extra if c in VELOCITY_COLUMNS]
    if velocity and len(velocity) != len(VELOCITY_COLUMNS):
        raise TraceFormatError(f"{path}: velocity needs all of {','.join(VELOCITY_COLUMNS)}, got {','.join(velocity)}")
    orientation = [c for c in extra if c.startswith("q")]
    if orientation:
        logger.warning(f"{path}: ignoring orientation columns {','.join(orientation)}")
    known = {"omega", "status", *VELOCITY_COLUMNS, *orientation}
    unknown = [c for c in extra if c not in known]
    if unknown:
        logger.warning(f"{path}: ignoring unknown columns {','.join(unknown)}")


def load_trace(path) -> Trace:
    """
    Load a trace file.

    Rows with non-finite values are dropped; the number dropped is logged and
    kept in Trace.dropped_rows. Timestamp jitter above 1% of the nominal rate and
    stick separations above the string length plus 2 cm are logged, not fatal.

    Args:
        path: Path to the trace file

    Returns:
        The parsed Trace

    Raises:
        TraceFormatError: If the header, a row's column count or a value is malformed,
            or timestamps are not strictly increasing
        EmptyTraceError: If no usable rows remain
        OSError: If the file cannot be read
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()

    meta_lines = []
    index = 0
    while index < len(lines) and (lines[index].startswith("#") or not lines[index].strip()):
        meta_lines.append(lines[index])
        index += 1
    if index == len(lines):
        raise TraceFormatError(f"{path}: no header line")
    meta = _parse_meta(meta_lines, path)

    header = [c.strip() for c in lines[index].split(",")]
    _check_header(header, path)

    body = [line for line in lines[index + 1 :] if line.strip()]
    for number, line in enumerate(body, start=index + 2):
        if line.count(",") + 1 != len(header):
            raise TraceFormatError(f"{path}:{number}: expected {len(header)} columns, got {line.count(',') + 1}")
    if not body:
        raise EmptyTraceError(f"{path}: trace has no samples")

    numeric = [c for c in header if c in REQUIRED_COLUMNS or c in VELOCITY_COLUMNS or c == "omega"]
    try:
        frame = pd.read_csv(
            io.StringIO("\n".join([",".join(header), *body])),
            dtype={c: np.float64 for c in numeric} | ({"status": str} if "status" in header else {}),
            keep_default_na=False,
            na_values=["nan", "NaN", "NA", ""],
        )
    except (ValueError, pd.errors.ParserError) as e:
        raise TraceFormatError(f"{path}: {e}") from e

    finite = np.isfinite(frame[numeric].to_numpy()).all(axis=1)
    if "status" in frame:
        finite &= frame["status"].notna().to_numpy()
    dropped = int((~finite).sum())
    if dropped:
        logger.warning(f"{path}: dropped {dropped} rows with non-finite values")
        frame = frame[finite]
    if frame.empty:
        raise EmptyTraceError(f"{path}: no finite samples")

    status = None
    if "status" in frame:
        try:
            status = tuple(ContactStatus(s.strip()) for s in frame["status"])
        except ValueError as e:
            raise TraceFormatError(f"{path}: {e}") from e

    trace = Trace(
        meta=meta,
        t=frame["t"].to_numpy(),
        left=frame[["lx", "ly", "lz"]].to_numpy(),
        right=frame[["rx", "ry", "rz"]].to_numpy(),
        diabolo=frame[["dx", "dy", "dz"]].to_numpy(),
        omega=frame["omega"].to_numpy() if "omega" in frame else None,
        velocity=frame[list(VELOCITY_COLUMNS)].to_numpy() if "vx" in frame else None,
        status=status,
        dropped_rows=dropped,
    )
    _audit(trace, path)
    logger.info(f"Loaded {len(trace)} samples ({trace.duration:.3f} s) from {path}")
    return trace


def _audit(trace: Trace, path) -> None:
    nominal = 1.0 / trace.meta.sample_rate
    if len(trace) > 1:
        jitter = np.abs(np.diff(trace.t) - nominal)
        if np.any(jitter > JITTER_TOLERANCE * nominal):
            logger.warning(
                f"{path}: sample spacing deviates up to {jitter.max() * 1e3:.3f} ms "
                f"from the nominal {trace.meta.sample_rate:g} Hz"
            )
    separation = np.linalg.norm(trace.right - trace.left, axis=1)
    overstretched = int((separation > trace.meta.l_string + SEPARATION_SLACK).sum())
    if overstretched:
        logger.warning(
            f"{path}: {overstretched} samples have the sticks more than "
            f"{trace.meta.l_string + SEPARATION_SLACK:.3f} m apart"
        )


def trace_frame(trace: Trace) -> pd.DataFrame:
    """Trace samples as a DataFrame with the file's column names."""
    columns = {"t": trace.t}
    for prefix, values in (("l", trace.left), ("r", trace.right), ("d", trace.diabolo)):
        for axis, name in enumerate("xyz"):
            columns[f"{prefix}{name}"] = values[:, axis]
    if trace.omega is not None:
        columns["omega"] = trace.omega
    if trace.velocity is not None:
        for axis, name in enumerate(VELOCITY_COLUMNS):
            columns[name] = trace.velocity[:, axis]
    if trace.status is not None:
        columns["status"] = [s.value for s in trace.status]
    return pd.DataFrame(columns)


def dumps_trace(trace: Trace) -> str:
    meta = trace.meta
    header = (
        f"# diabolo={meta.diabolo}\n"
        f"# l_string={meta.l_string:.12g}\n"
        f"# sample_rate={meta.sample_rate:.12g}\n"
        f"# motion_class={meta.motion_class}\n"
    )
    return header + trace_frame(trace).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_trace(trace: Trace, path) -> Path:
    """Write a trace file atomically, 12 significant digits per value."""
    path = atomic_write_text(path, dumps_trace(trace))
    logger.info(f"Wrote {len(trace)} samples to {path}")
    return path


def trace_from_states(
    states: Sequence[DiaboloState],
    sticks: Sequence[StickPair],
    meta: TraceMeta,
) -> Trace:
    """Ground-truth trace of a rollout; sticks[i] is the stick pose at states[i]."""
    if len(states) != len(sticks):
        raise InputError(f"{len(states)} states but {len(sticks)} stick poses")
    return Trace(
        meta=meta,
        t=np.array([s.time for s in states]),
        left=np.array([p.left for p in sticks]),
        right=np.array([p.right for p in sticks]),
        diabolo=np.array([s.position for s in states]),
        omega=np.array([s.omega for s in states]),
        velocity=np.array([s.velocity for s in states]),
        status=tuple(s.status for s in states),
    )


def resample(trace: Trace, dt: float) -> Trace:
    """
    Linearly interpolate every channel onto a uniform grid starting at the first sample.

    The contact status is held from the last sample at or before each grid time.

    Raises:
        InputError: If dt is not positive
        EmptyTraceError: If the trace has fewer than two samples
    """
    if not dt > 0:
        raise InputError(f"Resampling interval must be positive, got {dt}")
    if len(trace) < 2:
        raise EmptyTraceError("Resampling needs at least two samples")

    count = int(np.floor(trace.duration / dt + 1e-9)) + 1
    grid = trace.t[0] + np.arange(count) * dt
    grid[-1] = min(grid[-1], trace.t[-1])

    def interp(values):
        if values is None:
            return None
        if values.ndim == 1:
            return np.interp(grid, trace.t, values)
        return np.column_stack([np.interp(grid, trace.t, values[:, axis]) for axis in range(values.shape[1])])

    status = None
    if trace.status is not None:
        index = np.searchsorted(trace.t, grid, side="right") - 1
        status = tuple(trace.status[i] for i in np.clip(index, 0, len(trace) - 1))

    logger.debug(f"Resampled {len(trace)} samples to {count} at dt={dt}")
    return Trace(
        meta=replace(trace.meta, sample_rate=1.0 / dt),
        t=grid,
        left=interp(trace.left),
        right=interp(trace.right),
        diabolo=interp(trace.diabolo),
        omega=interp(trace.omega),
        velocity=interp(trace.velocity),
        status=status,
        dropped_rows=trace.dropped_rows,
    )


def smooth(trace: Trace, window: int) -> Trace:
    """Moving-average filter over the position channels; window is in samples, <= 1 is a no-op."""
    if window <= 1:
        return trace
    if window > len(trace):
        logger.warning(f"Smoothing window {window} is longer than the trace ({len(trace)} samples)")

    def filtered(values):
        return uniform_filter1d(values, size=window, axis=0, mode="nearest")

    return replace(
        trace,
        left=filtered(trace.left),
        right=filtered(trace.right),
        diabolo=filtered(trace.diabolo),
    )


def write_error_curve(curve: ErrorCurve, path) -> Path:
    """Write an error curve as a long-format (horizon, error) table."""
    frame = pd.DataFrame({"horizon": curve.horizons, "error": curve.errors})
    return atomic_write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def write_class_report(report: pd.DataFrame, path) -> Path:
    return atomic_write_text(path, report.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def write_trajectory(traj: StickTrajectory, path) -> Path:
    """Write the control points of a stick trajectory, one row per point."""
    frame = pd.DataFrame(
        [[p.t, *p.left, *p.right] for p in traj.points],
        columns=["t", "lx", "ly", "lz", "rx", "ry", "rz"],
    )
    return atomic_write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def load_trajectory(path, l_string: float | None = None) -> StickTrajectory:
    """Read a control-point file written by write_trajectory.

    Raises:
        TraceFormatError: If the columns are wrong or the times are not increasing
    """
    try:
        frame = pd.read_csv(path, dtype=np.float64)
    except (ValueError, pd.errors.ParserError) as e:
        raise TraceFormatError(f"{path}: {e}") from e
    if list(frame.columns) != ["t", "lx", "ly", "lz", "rx", "ry", "rz"]:
        raise TraceFormatError(f"{path}: expected columns t,lx,ly,lz,rx,ry,rz, got {','.join(frame.columns)}")
    try:
        points = [ControlPoint(row[0], row[1:4], row[4:7]) for row in frame.to_numpy()]
        return StickTrajectory(points=tuple(points), l_string=l_string)
    except InputError as e:
        raise TraceFormatError(f"{path}: {e}") from e


def write_history(history: Sequence[float], path) -> Path:
    """Write an optimizer residual history as (iteration, residual) rows."""
    frame = pd.DataFrame({"iteration": np.arange(len(history)), "residual": np.asarray(history, dtype=np.float64)})
    return atomic_write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
