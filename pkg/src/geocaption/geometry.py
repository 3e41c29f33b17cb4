"""Small 2-D vector helpers on (x, y) float tuples.

Plain floats rather than numpy arrays: scenes hold a handful of points and
per-call array overhead dominates at that size.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

Point = tuple[float, float]


def add(p: Point, q: Point) -> Point:
    return (p[0] + q[0], p[1] + q[1])


def sub(p: Point, q: Point) -> Point:
    return (p[0] - q[0], p[1] - q[1])


def scale(p: Point, s: float) -> Point:
    return (p[0] * s, p[1] * s)


def dot(p: Point, q: Point) -> float:
    return p[0] * q[0] + p[1] * q[1]


def cross(p: Point, q: Point) -> float:
    return p[0] * q[1] - p[1] * q[0]


def norm(p: Point) -> float:
    return math.hypot(p[0], p[1])


def dist(p: Point, q: Point) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def unit(v: Point) -> Point:
    n = norm(v)
    if n == 0.0:
        raise ZeroDivisionError("zero-length vector")
    return (v[0] / n, v[1] / n)


def rot90(v: Point) -> Point:
    return (-v[1], v[0])


def polar(r: float, theta: float) -> Point:
    return (r * math.cos(theta), r * math.sin(theta))


def midpoint(p: Point, q: Point) -> Point:
    return ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)


def angle_at(vertex: Point, p: Point, q: Point) -> float:
    """Unsigned angle p-vertex-q in radians, in [0, pi]."""
    u = sub(p, vertex)
    v = sub(q, vertex)
    return math.atan2(abs(cross(u, v)), dot(u, v))


def foot(p: Point, a: Point, b: Point) -> Point:
    """Orthogonal projection of p onto line ab."""
    d = sub(b, a)
    t = dot(sub(p, a), d) / dot(d, d)
    return (a[0] + t * d[0], a[1] + t * d[1])


def reflect_across_line(p: Point, a: Point, b: Point) -> Point:
    f = foot(p, a, b)
    return (2.0 * f[0] - p[0], 2.0 * f[1] - p[1])


def point_line_distance(p: Point, a: Point, b: Point) -> float:
    d = sub(b, a)
    return abs(cross(d, sub(p, a))) / norm(d)


def line_intersection(a: Point, b: Point, c: Point, d: Point) -> Optional[Point]:
    """Intersection of lines ab and cd, or None when they are parallel."""
    r = sub(b, a)
    s = sub(d, c)
    denom = cross(r, s)
    if abs(denom) <= 1e-12 * norm(r) * norm(s):
        return None
    t = cross(sub(c, a), s) / denom
    return (a[0] + t * r[0], a[1] + t * r[1])


def line_circle_intersections(a: Point, b: Point, center: Point, radius: float) -> list[Point]:
    """Points where line ab meets the circle; empty when the line misses it."""
    d = unit(sub(b, a))
    f = foot(center, a, b)
    h2 = radius * radius - dist(center, f) ** 2
    if h2 < 0.0:
        return []
    h = math.sqrt(h2)
    return [(f[0] - h * d[0], f[1] - h * d[1]), (f[0] + h * d[0], f[1] + h * d[1])]


def circumcenter(a: Point, b: Point, c: Point) -> Optional[Point]:
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    scale_ = max(bx * bx + by * by, cx * cx + cy * cy)
    if abs(d) <= 1e-12 * scale_:
        return None
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return (a[0] + ux, a[1] + uy)


def incenter(a: Point, b: Point, c: Point) -> Point:
    la, lb, lc = dist(b, c), dist(a, c), dist(a, b)
    s = la + lb + lc
    return ((la * a[0] + lb * b[0] + lc * c[0]) / s, (la * a[1] + lb * b[1] + lc * c[1]) / s)


def centroid(points: Sequence[Point]) -> Point:
    n = len(points)
    return (sum(p[0] for p in points) / n, sum(p[1] for p in points) / n)


def orthocenter(a: Point, b: Point, c: Point) -> Optional[Point]:
    o = circumcenter(a, b, c)
    if o is None:
        return None
    return (a[0] + b[0] + c[0] - 2.0 * o[0], a[1] + b[1] + c[1] - 2.0 * o[1])
