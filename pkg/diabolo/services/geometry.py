"""Auxiliary spheroid geometry.

The spheroid has its foci at the stick tips and a focal sum equal to the string
length, so its surface is the set of diabolo positions reachable with a taut
string. Closest-point projection uses the scaled-sphere construction: go to the
spheroid frame, scale the axes to the unit sphere, project radially, scale back.
The signed distance is measured to that same projected point.
"""

import logging
import math

import numpy as np

from diabolo.exceptions import DegenerateGeometryError, InputError
from diabolo.models import WORLD_Y, WORLD_Z, Spheroid, StickPair, Vec3

logger = logging.getLogger(__name__)

# Below this semi-minor axis the surface normals are ill-conditioned.
B_MIN = 1e-4  # m

# Relative slack on the string-length check for round-off in stick coordinates.
_SPAN_TOLERANCE = 1e-12


def build_spheroid(sticks: StickPair, l_string: float) -> Spheroid:
    """Build the auxiliary spheroid for a stick pair.

    Args:
        sticks: Stick-tip positions
        l_string: String length in meters

    Returns:
        Spheroid with a = l_string / 2 and b = sqrt(a^2 - (d/2)^2)

    Raises:
        InputError: If the sticks are further apart than the string length
    """
    if not math.isfinite(l_string) or l_string <= 0:
        raise InputError(f"String length must be positive and finite, got {l_string!r}")

    offset = sticks.right - sticks.left
    d = float(np.linalg.norm(offset))
    if d > l_string * (1.0 + _SPAN_TOLERANCE):
        raise InputError(f"Sticks are {d:.6f} m apart, more than the {l_string:.6f} m string")

    a = l_string / 2.0
    half = min(d / 2.0, a)
    b = math.sqrt(max(a * a - half * half, 0.0))
    axis = offset / d if d > 0.0 else WORLD_Y.copy()
    axis.flags.writeable = False
    center = sticks.midpoint
    center.flags.writeable = False
    return Spheroid(center=center, axis_dir=axis, a=a, b=b)


def _local(sph: Spheroid, p: Vec3) -> tuple[Vec3, float, Vec3, float]:
    """Split p - center into the axial coordinate u and the radial vector w."""
    rel = p - sph.center
    u = float(rel @ sph.axis_dir)
    w = rel - u * sph.axis_dir
    return rel, u, w, float(np.linalg.norm(w))


def surface_residual(sph: Spheroid, p: Vec3) -> float:
    """Implicit function (u/a)^2 + (r/b)^2 - 1: negative inside, zero on the surface."""
    _, u, _, r = _local(sph, p)
    if sph.b == 0.0:
        return math.inf if r > 0.0 else (u / sph.a) ** 2 - 1.0
    return (u / sph.a) ** 2 + (r / sph.b) ** 2 - 1.0


def closest_point_on_axis_segment(sph: Spheroid, p: Vec3) -> Vec3:
    """Closest point to p on the segment between the foci."""
    focal = math.sqrt(max(sph.a * sph.a - sph.b * sph.b, 0.0))
    u = float((p - sph.center) @ sph.axis_dir)
    return sph.center + min(max(u, -focal), focal) * sph.axis_dir


def signed_distance(sph: Spheroid, p: Vec3) -> float:
    """Signed distance of p from the spheroid surface, positive inside.

    A collapsed spheroid (b == 0) is treated as the focal segment, so every
    point off the segment is outside. The center of a non-degenerate spheroid
    is reported at distance b.
    """
    if sph.b == 0.0:
        return -float(np.linalg.norm(p - closest_point_on_axis_segment(sph, p)))

    rel, u, _, r = _local(sph, p)
    rho = math.hypot(u / sph.a, r / sph.b)
    if rho == 0.0:
        return sph.b
    return float(np.linalg.norm(rel)) * (1.0 / rho - 1.0)


def _perpendicular_down(axis: Vec3) -> Vec3:
    """Unit vector perpendicular to axis, as close to world -z as possible."""
    down = -WORLD_Z - float(-WORLD_Z @ axis) * axis
    norm = float(np.linalg.norm(down))
    if norm < 1e-12:
        down = np.cross(axis, WORLD_Y)
        norm = float(np.linalg.norm(down))
    return down / norm


def project_to_surface(sph: Spheroid, p: Vec3) -> tuple[Vec3, Vec3]:
    """Project p onto the spheroid surface.

    Returns:
        Tuple of (point on the surface, outward unit normal at that point)

    Raises:
        DegenerateGeometryError: If the semi-minor axis is below B_MIN
    """
    if sph.b < B_MIN:
        raise DegenerateGeometryError(f"Spheroid semi-minor axis {sph.b:.2e} m is below {B_MIN:.0e} m")

    _, u, w, r = _local(sph, p)
    rho = math.hypot(u / sph.a, r / sph.b)
    if rho == 0.0:
        normal = _perpendicular_down(sph.axis_dir)
        return sph.center + sph.b * normal, normal

    pu = u / rho
    pw = w / rho
    point = sph.center + pu * sph.axis_dir + pw
    gradient = (pu / (sph.a * sph.a)) * sph.axis_dir + pw / (sph.b * sph.b)
    return point, gradient / np.linalg.norm(gradient)


def bottom_point(sph: Spheroid) -> Vec3:
    """Lowest point of the spheroid's equator, where a diabolo hangs under still sticks."""
    return sph.center + sph.b * _perpendicular_down(sph.axis_dir)
