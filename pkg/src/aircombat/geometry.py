"""Planar combat geometry.

Positions are ``(x, y)`` in kilometres, x pointing east and y north. Headings
are degrees clockwise from north, so a heading ``h`` has the unit vector
``(sin h, cos h)``.
"""

import math

from .errors import DegenerateGeometryError, InvalidInputError

# Below this separation (km) two aircraft are treated as coincident.
COINCIDENT_KM = 1e-12


def wrap_heading(raw):
    """Normalize an angle in degrees to ``[0, 360)``."""
    if not math.isfinite(raw):
        raise InvalidInputError(f"heading must be finite, got {raw!r}")
    h = math.fmod(raw, 360.0)
    if h < 0.0:
        h += 360.0
    # fmod of a tiny negative number can round up to exactly 360
    if h >= 360.0:
        h = 0.0
    return h


def signed_delta(from_deg, to_deg):
    """Shortest signed turn from one heading to another, in ``(-180, 180]``."""
    d = math.fmod(to_deg - from_deg, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def heading_vector(heading):
    rad = math.radians(heading)
    return math.sin(rad), math.cos(rad)


def bearing(a, b):
    """Compass bearing in degrees from ``a`` to ``b``."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    if math.hypot(dx, dy) <= COINCIDENT_KM:
        raise DegenerateGeometryError("bearing between coincident positions")
    return wrap_heading(math.degrees(math.atan2(dx, dy)))


def distance_km(a, b):
    ax, ay = a
    bx, by = b
    if not all(math.isfinite(v) for v in (ax, ay, bx, by)):
        raise InvalidInputError("positions must be finite")
    return math.hypot(bx - ax, by - ay)


def _angle_between(ux, uy, vx, vy):
    # atan2 of cross/dot is accurate near 0 and 180, unlike acos of the dot product
    cross = ux * vy - uy * vx
    dot = ux * vx + uy * vy
    return math.degrees(math.atan2(abs(cross), dot))


def ata(observer_pos, observer_heading, target_pos):
    """Antenna train angle in ``[0, 180]``.

    0 when the observer points straight at the target, 180 when the target
    is directly behind.
    """
    dx = target_pos[0] - observer_pos[0]
    dy = target_pos[1] - observer_pos[1]
    if math.hypot(dx, dy) <= COINCIDENT_KM:
        raise DegenerateGeometryError("ATA undefined for coincident positions")
    hx, hy = heading_vector(observer_heading)
    return _angle_between(hx, hy, dx, dy)


def aspect_angle(observer_pos, target_pos, target_heading):
    """Aspect angle in ``[0, 180]``.

    0 when the target flies directly away from the observer (tail exposed),
    180 when it comes head-on.
    """
    dx = target_pos[0] - observer_pos[0]
    dy = target_pos[1] - observer_pos[1]
    if math.hypot(dx, dy) <= COINCIDENT_KM:
        raise DegenerateGeometryError("aspect angle undefined for coincident positions")
    hx, hy = heading_vector(target_heading)
    return _angle_between(dx, dy, hx, hy)


def relative_bearing(observer_pos, observer_heading, target_pos):
    """Signed bearing of the target off the observer's nose, in ``(-180, 180]``.

    Positive means the target is to the right.
    """
    return signed_delta(observer_heading, bearing(observer_pos, target_pos))


def in_wez(shooter_pos, shooter_heading, spec, target_pos):
    """Whether ``target_pos`` lies in the shooter's weapon engagement cone."""
    if distance_km(shooter_pos, target_pos) > spec.d_a_max:
        return False
    return ata(shooter_pos, shooter_heading, target_pos) <= spec.wez_half_angle_max
