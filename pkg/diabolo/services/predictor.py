"""
Service module for the stepped analytical diabolo model.

One call to step() advances a DiaboloState by one timestep given the stick
positions before and after the step:

1. rotation speed update from the string passed along the axle (ON_STRING only)
2. forward Euler extrapolation under gravity and spheroid rebuild
3. contact status transition from the signed distance
4. constraint: move an escaped diabolo back onto the spheroid and add a damped,
   capped pull velocity; replaced by the cut-plane rule when the sticks are
   nearly a string length apart

FLYING and OFF_STRING_LOOSE diabolos move ballistically.
"""

import logging
from dataclasses import replace

import numpy as np

from diabolo.exceptions import DegenerateGeometryError
from diabolo.models import (
    WORLD_X,
    ContactStatus,
    DiaboloState,
    ModelParams,
    Spheroid,
    StepDiagnostics,
    StickPair,
    Vec3,
)
from diabolo.services.geometry import (
    build_spheroid,
    closest_point_on_axis_segment,
    project_to_surface,
    signed_distance,
)

logger = logging.getLogger(__name__)

_ZERO = np.zeros(3)
_ZERO.flags.writeable = False

# Legal status edges, for rollout auditing.
TRANSITIONS: frozenset[tuple[ContactStatus, ContactStatus]] = frozenset(
    {
        (ContactStatus.ON_STRING, ContactStatus.OFF_STRING_LOOSE),
        (ContactStatus.OFF_STRING_LOOSE, ContactStatus.FLYING),
        (ContactStatus.OFF_STRING_LOOSE, ContactStatus.ON_STRING),
        (ContactStatus.FLYING, ContactStatus.ON_STRING),
    }
)


def string_delta(position: Vec3, sticks_prev: StickPair, sticks_now: StickPair) -> float:
    """Length of string passed along the axle: change of the right-stick distance."""
    d_prev = float(np.linalg.norm(sticks_prev.right - position))
    d_now = float(np.linalg.norm(sticks_now.right - position))
    return d_now - d_prev


def update_rotation(
    state: DiaboloState,
    sticks_prev: StickPair,
    sticks_now: StickPair,
    params: ModelParams,
) -> float:
    """Return the new rotation speed, clamped at zero."""
    delta = string_delta(state.position, sticks_prev, sticks_now)
    mu = params.mu_acc if delta > 0 else params.mu_dec
    return max(0.0, state.omega + mu * delta)


def cap_pull_velocity(v_pull: Vec3, sph_prev: Spheroid, sph_now: Spheroid, dt: float) -> Vec3:
    """Limit the pull velocity by the motion of the spheroid's origin and edge."""
    return _cap(v_pull, sph_prev, sph_now, dt)[0]


def _cap(v_pull: Vec3, sph_prev: Spheroid, sph_now: Spheroid, dt: float) -> tuple[Vec3, Vec3, Vec3, float]:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v_origin = (sph_now.center - sph_prev.center) / dt
    magnitude = float(np.linalg.norm(v_pull))
    if magnitude == 0.0:
        return _ZERO.copy(), v_origin, _ZERO.copy(), float(np.linalg.norm(v_origin))

    direction = v_pull / magnitude
    v_edge = (max(0.0, sph_prev.b - sph_now.b) / dt) * direction
    cap = float(np.linalg.norm(v_origin + v_edge))
    return direction * min(magnitude, cap), v_origin, v_edge, cap


def cut_plane(sticks: StickPair) -> tuple[Vec3, Vec3]:
    """Plane through the stick midpoint that cuts the spheroid in half facing upwards.

    Raises:
        DegenerateGeometryError: If the sticks are aligned with world x
    """
    normal = np.cross(WORLD_X, sticks.left - sticks.right)
    norm = float(np.linalg.norm(normal))
    if norm < 1e-12:
        raise DegenerateGeometryError("Sticks are aligned with world x; the cut plane is undefined")
    normal = normal / norm
    if normal[2] < 0:
        normal = -normal
    return sticks.midpoint, normal


def transition(status: ContactStatus, s: float, params: ModelParams) -> ContactStatus:
    """Next contact status for signed distance s (positive inside the spheroid)."""
    if status is ContactStatus.ON_STRING:
        return ContactStatus.OFF_STRING_LOOSE if s > params.c_loose else status
    if status is ContactStatus.OFF_STRING_LOOSE:
        if s > params.c_flying:
            return ContactStatus.FLYING
        if s <= params.c_loose:
            return ContactStatus.ON_STRING
        return status
    return ContactStatus.ON_STRING if s <= 0 else status


def step(
    state: DiaboloState,
    sticks_prev: StickPair,
    sticks_now: StickPair,
    params: ModelParams,
) -> tuple[DiaboloState, StepDiagnostics]:
    """Advance the diabolo by one timestep.

    Raises:
        InputError: If sticks_now (or sticks_prev) are further apart than the string
    """
    dt = params.dt
    sph_prev = build_spheroid(sticks_prev, params.l_string)
    sph_now = build_spheroid(sticks_now, params.l_string)

    omega = state.omega
    delta_string = 0.0
    if state.status is ContactStatus.ON_STRING:
        delta_string = string_delta(state.position, sticks_prev, sticks_now)
        omega = update_rotation(state, sticks_prev, sticks_now, params)

    position = state.position + state.velocity * dt
    velocity = state.velocity + params.gravity_vector * dt

    s = signed_distance(sph_now, position)
    status = transition(state.status, s, params)
    if state.status is ContactStatus.FLYING and status is ContactStatus.ON_STRING:
        # The string can only catch the diabolo from below.
        if position[2] > sph_now.center[2]:
            status = ContactStatus.FLYING
        else:
            logger.debug(f"Recaptured diabolo at t={state.time + dt:.4f}s (s={s:.4g} m)")

    diagnostics = None
    if status is ContactStatus.ON_STRING:
        recaptured = state.status is ContactStatus.FLYING
        position, velocity, diagnostics = _constrain(
            position, velocity, s, recaptured, sticks_now, sph_prev, sph_now, params
        )
        velocity = velocity * params.damp_on_string

    if diagnostics is None:
        diagnostics = StepDiagnostics(
            v_pull=_ZERO,
            v_pull_capped=_ZERO,
            v_ellipse_origin=(sph_now.center - sph_prev.center) / dt,
            v_ellipse_edge=_ZERO,
            s=s,
            cut_plane_active=False,
            delta_string=delta_string,
        )
    else:
        diagnostics = replace(diagnostics, s=s, delta_string=delta_string)

    new_state = DiaboloState(
        position=position,
        velocity=velocity,
        omega=omega,
        status=status,
        time=state.time + dt,
    )
    return new_state, diagnostics


def _constrain(
    position: Vec3,
    velocity: Vec3,
    s: float,
    recaptured: bool,
    sticks_now: StickPair,
    sph_prev: Spheroid,
    sph_now: Spheroid,
    params: ModelParams,
) -> tuple[Vec3, Vec3, StepDiagnostics]:
    """Apply the string constraint to an extrapolated ON_STRING position."""
    dt = params.dt
    plane = None
    if sticks_now.separation > params.l_string - params.throw_gap:
        try:
            plane = cut_plane(sticks_now)
        except DegenerateGeometryError:
            logger.debug("Cut plane undefined, staying in spheroid mode")

    v_pull = _ZERO
    v_capped = _ZERO
    v_origin = (sph_now.center - sph_prev.center) / dt
    v_edge = _ZERO
    cap = 0.0
    capped = False
    projected = False

    if s < 0 or recaptured:
        try:
            target, normal = project_to_surface(sph_now, position)
        except DegenerateGeometryError:
            target, normal = closest_point_on_axis_segment(sph_now, position), None
        displacement = target - position
        distance = float(np.linalg.norm(displacement))
        if normal is not None:
            v_pull = -(distance / dt) * normal
        else:
            v_pull = displacement / dt
        if plane is not None:
            v_pull = float(v_pull @ plane[1]) * plane[1]

        damped = v_pull * params.damp_pull_pre
        v_capped, v_origin, v_edge, cap = _cap(damped, sph_prev, sph_now, dt)
        capped = float(np.linalg.norm(damped)) > cap

        if plane is None and normal is not None:
            outward = float(velocity @ normal)
            if outward > 0:
                velocity = velocity - outward * normal
        velocity = velocity + v_capped * params.damp_pull_post
        position = target
        projected = True

    if plane is not None:
        point, plane_normal = plane
        height = float((position - point) @ plane_normal)
        if height < 0:
            position = position - height * plane_normal
            into = float(velocity @ plane_normal)
            if into < 0:
                velocity = velocity - into * plane_normal

    diagnostics = StepDiagnostics(
        v_pull=v_pull,
        v_pull_capped=v_capped,
        v_ellipse_origin=v_origin,
        v_ellipse_edge=v_edge,
        s=s,
        cut_plane_active=plane is not None,
        delta_string=0.0,
        cap=cap,
        capped=capped,
        projected=projected,
    )
    return position, velocity, diagnostics


def is_legal_transition(before: ContactStatus, after: ContactStatus) -> bool:
    return before is after or (before, after) in TRANSITIONS


def ballistic_position(state: DiaboloState, steps: int, params: ModelParams) -> Vec3:
    """Closed form of the forward Euler recurrence under gravity after `steps` steps."""
    dt = params.dt
    g = params.gravity_vector
    return state.position + steps * dt * state.velocity + g * dt * dt * (steps * (steps - 1) / 2.0)

