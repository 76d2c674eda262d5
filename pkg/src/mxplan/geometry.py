"""Exact 2-D geometry for regions, collision checks and detour targets.

Regions are closed convex polygons (counter-clockwise vertex order);
touching a boundary counts as being inside.  The detour target is the
point the obstacle loss pulls a colliding step toward: a small offset
from the visibility-cone tangent vertex nearest the intended stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_EPS = 1e-12

Point = tuple[float, float]


class ApexInsideRegion(Exception):
    """Raised when a cone apex lies inside the region it should see from outside."""


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _sub(a: Point, b: Point) -> Point:
    return (a[0] - b[0], a[1] - b[1])


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Region:
    """Closed convex polygon with obstacle/objective flags."""

    name: str
    vertices: tuple[Point, ...]
    is_obstacle: bool = False
    is_objective: bool = False

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"region {self.name!r} needs at least 3 vertices")
        if self._signed_area() <= 0:
            raise ValueError(f"region {self.name!r} must be counter-clockwise with area > 0")
        n = len(self.vertices)
        for i in range(n):
            o, a, b = self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]
            if _cross(o, a, b) < 0:
                raise ValueError(f"region {self.name!r} is not convex")

    def _signed_area(self) -> float:
        s = 0.0
        n = len(self.vertices)
        for i in range(n):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % n]
            s += x1 * y2 - x2 * y1
        return 0.5 * s

    @staticmethod
    def rect(name: str, x0: float, y0: float, x1: float, y1: float, *,
             is_obstacle: bool = False, is_objective: bool = False) -> "Region":
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"degenerate rectangle for region {name!r}")
        return Region(name, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)),
                      is_obstacle=is_obstacle, is_objective=is_objective)

    @property
    def centroid(self) -> Point:
        xs = sum(v[0] for v in self.vertices) / len(self.vertices)
        ys = sum(v[1] for v in self.vertices) / len(self.vertices)
        return (xs, ys)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))


def contains(r: Region, p: Point) -> bool:
    """Closed-region membership: boundary points count as inside."""
    n = len(r.vertices)
    for i in range(n):
        if _cross(r.vertices[i], r.vertices[(i + 1) % n], p) < -_EPS:
            return False
    return True


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    if abs(_cross(a, b, p)) > _EPS * max(1.0, _dist(a, b)):
        return False
    return (min(a[0], b[0]) - _EPS <= p[0] <= max(a[0], b[0]) + _EPS
            and min(a[1], b[1]) - _EPS <= p[1] <= max(a[1], b[1]) + _EPS)


def _segments_intersect(p: Point, q: Point, a: Point, b: Point) -> bool:
    d1 = _cross(p, q, a)
    d2 = _cross(p, q, b)
    d3 = _cross(a, b, p)
    d4 = _cross(a, b, q)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != d2 and d3 != d4:
        return True
    return (_on_segment(p, q, a) or _on_segment(p, q, b)
            or _on_segment(a, b, p) or _on_segment(a, b, q))


def segment_intersects(r: Region, p: Point, q: Point) -> bool:
    """True iff the closed segment pq meets the closed region."""
    if contains(r, p) or contains(r, q):
        return True
    n = len(r.vertices)
    for i in range(n):
        if _segments_intersect(p, q, r.vertices[i], r.vertices[(i + 1) % n]):
            return True
    return False


def tangent_vertices(r: Region, apex: Point) -> tuple[Point, Point]:
    """The two angular-extreme vertices of r as seen from an apex outside r.

    Returned as (clockwise-most, counter-clockwise-most) relative to the
    direction from the apex to the region centroid.
    """
    if contains(r, apex):
        raise ApexInsideRegion(f"apex {apex} lies inside region {r.name!r}")
    ref = _sub(r.centroid, apex)
    best_lo = best_hi = None
    lo = hi = 0.0
    for v in r.vertices:
        d = _sub(v, apex)
        ang = math.atan2(ref[0] * d[1] - ref[1] * d[0], ref[0] * d[0] + ref[1] * d[1])
        if best_lo is None or ang < lo:
            best_lo, lo = v, ang
        if best_hi is None or ang > hi:
            best_hi, hi = v, ang
    assert best_lo is not None and best_hi is not None
    return best_lo, best_hi


def cone_contains(apex: Point, t1: Point, t2: Point, p: Point) -> bool:
    """Membership in the closed cone with given apex and boundary rays through t1, t2."""
    # t1 is the clockwise boundary, t2 the counter-clockwise one.
    return _cross(apex, t1, p) >= -_EPS and _cross(apex, p, t2) >= -_EPS


@dataclass(frozen=True)
class Cone:
    apex: Point
    t1: Point  # clockwise tangent vertex
    t2: Point  # counter-clockwise tangent vertex

    def __contains__(self, p: Point) -> bool:
        return cone_contains(self.apex, self.t1, self.t2, p)


def cone_of(r: Region, apex: Point) -> Cone:
    t1, t2 = tangent_vertices(r, apex)
    return Cone(apex, t1, t2)


def detour_target(r: Region, p_i: Point, p_next: Point, eps: float = 0.5) -> Point:
    """Point at distance eps from the tangent vertex nearest p_next, outside both cone and region.

    Offset direction is the outward normal of the cone boundary ray through
    the chosen vertex, on the side away from the cone interior.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cone = cone_of(r, p_i)
    d1, d2 = _dist(p_next, cone.t1), _dist(p_next, cone.t2)
    if d1 < d2:
        y = cone.t1
    elif d2 < d1:
        y = cone.t2
    else:
        # tie-break: smaller angle from the +x axis
        a1 = math.atan2(cone.t1[1] - p_i[1], cone.t1[0] - p_i[0])
        a2 = math.atan2(cone.t2[1] - p_i[1], cone.t2[0] - p_i[0])
        y = cone.t1 if a1 <= a2 else cone.t2
    u = _sub(y, p_i)
    norm = math.hypot(*u)
    if norm < _EPS:
        raise ApexInsideRegion(f"apex {p_i} coincides with a vertex of region {r.name!r}")
    u = (u[0] / norm, u[1] / norm)
    # rotate the ray direction 90 degrees to the side away from the cone interior
    if y == cone.t1:
        n = (u[1], -u[0])   # clockwise boundary: outward is further clockwise
    else:
        n = (-u[1], u[0])
    return (y[0] + eps * n[0], y[1] + eps * n[1])
