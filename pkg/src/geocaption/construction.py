"""Numeric instantiation of clause programs.

Every relation has a placement procedure (coordinates for its new points,
possibly using random free parameters) and a name-level claim set (which
segments are drawn and which facts the relation asserts). A clause is admitted
only when its points are well separated, its angles are legible and every
fact it asserts holds numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import geometry as g
from .dsl import (REGISTRY, Clause, ClauseList, RelationRegistry, parse_program,
                  print_program, validate_clause)
from .facts import (Angle, AngleEq, AngleValue, Collinear, Fact, FactSet, OnCircle,
                    Parallel, PointPresent, RightAngle, Seg, SegmentEq, SegmentLength,
                    SegmentPresent, canon_angle, canon_seg, canonicalize)
from .geometry import Point

EPS_DIST = 0.05
MIN_ANGLE_DEG = 10.0
MAX_EXTENT = 10.0
ANGLE_SNAP_TOL = 0.5
ANGLE_GRID = 15
EXACT_ANGLE_TOL = 1e-7  # degrees
RESIDUAL_TOL = 1e-6
MAX_ATTEMPTS = 100
SCENE_RETRIES = 20
PROGRAM_RETRIES = 20
EXACT_ANGLE_PROB = 0.5
LENGTH_SCALE_RANGE = (1.0, 10.0)

DIFFICULTIES = ("easy", "medium", "hard")
DIFFICULTY_CLAUSES = {"easy": (2, 3), "medium": (4, 6), "hard": (7, 10)}
EASY_MAX_POINTS = 5


class ConstructionError(Exception):
    pass


class DegenerateConstruction(ConstructionError):
    def __init__(self, clause: Optional[Clause], reason: str):
        super().__init__(f"degenerate construction at {clause}: {reason}")
        self.clause = clause
        self.reason = reason


class NumericFailure(ConstructionError):
    def __init__(self, clause: Optional[Clause], reason: str = "no solution"):
        super().__init__(f"numeric failure at {clause}: {reason}")
        self.clause = clause
        self.reason = reason


class ExhaustedRetries(ConstructionError):
    pass


class _Degenerate(Exception):
    pass


class _NoSolution(Exception):
    pass


@dataclass(frozen=True)
class Claims:
    """Name-level consequences of one clause."""
    segments: tuple[Seg, ...] = ()
    circles: tuple[tuple[str, str], ...] = ()  # (center, point on circle)
    seg_eq: tuple[tuple[Seg, ...], ...] = ()
    angle_eq: tuple[tuple[Angle, ...], ...] = ()
    parallel: tuple[tuple[Seg, ...], ...] = ()
    right_angles: tuple[Angle, ...] = ()
    collinear: tuple[tuple[str, ...], ...] = ()
    on_circle: tuple[tuple[str, tuple[str, ...]], ...] = ()
    # angles measured after placement; exact multiples of 15 degrees get annotated
    measured: tuple[Angle, ...] = ()
    crossings: tuple[tuple[Seg, Seg], ...] = ()


@dataclass(frozen=True)
class Construction:
    place: Callable[[Sequence[Point], np.random.Generator], list[Point]]
    claims: Callable[[tuple[str, ...], tuple[str, ...]], Claims]
    free: bool


# -- placement ---------------------------------------------------------------

def _sample_angle(rng: np.random.Generator, lo: float, hi: float) -> float:
    if rng.random() < EXACT_ANGLE_PROB:
        grid = [k for k in range(ANGLE_GRID, 180, ANGLE_GRID) if lo <= k <= hi]
        if grid:
            return float(grid[int(rng.integers(len(grid)))])
    return float(rng.uniform(lo, hi))


def _in_frame(local: Sequence[Point], rng: np.random.Generator) -> list[Point]:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    ox, oy = rng.uniform(-0.5, 0.5, size=2)
    flip = -1.0 if rng.random() < 0.5 else 1.0
    c, s = math.cos(theta), math.sin(theta)
    out = []
    for x, y in local:
        y = flip * y
        out.append((float(ox + c * x - s * y), float(oy + s * x + c * y)))
    return out


def _place_free(args, rng):
    x, y = rng.uniform(-1.5, 1.5, size=2)
    return [(float(x), float(y))]


def _place_segment(args, rng):
    length = rng.uniform(1.0, 2.0)
    return _in_frame([(0.0, 0.0), (length, 0.0)], rng)


def _place_triangle(args, rng):
    base = rng.uniform(1.0, 2.0)
    alpha = _sample_angle(rng, 15.0, 140.0)
    beta = _sample_angle(rng, 15.0, min(140.0, 170.0 - alpha))
    a_rad, b_rad = math.radians(alpha), math.radians(beta)
    side = base * math.sin(b_rad) / math.sin(a_rad + b_rad)
    return _in_frame([(0.0, 0.0), (base, 0.0), g.polar(side, a_rad)], rng)


def _place_iso_triangle(args, rng):
    base = rng.uniform(1.0, 2.0)
    beta = math.radians(_sample_angle(rng, 25.0, 80.0))
    apex = (0.0, 0.5 * base * math.tan(beta))
    return _in_frame([apex, (-0.5 * base, 0.0), (0.5 * base, 0.0)], rng)


def _place_equilateral(args, rng):
    side = rng.uniform(1.0, 2.0)
    return _in_frame([(0.0, 0.0), (side, 0.0), (0.5 * side, 0.5 * math.sqrt(3.0) * side)], rng)


def _place_square(args, rng):
    side = rng.uniform(1.0, 2.0)
    return _in_frame([(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)], rng)


def _place_parallelogram(args, rng):
    l1 = rng.uniform(1.0, 2.0)
    l2 = l1 * rng.uniform(0.5, 1.0)
    d = g.polar(l2, math.radians(_sample_angle(rng, 35.0, 145.0)))
    return _in_frame([(0.0, 0.0), (l1, 0.0), (l1 + d[0], d[1]), d], rng)


def _place_trapezoid(args, rng):
    l1 = rng.uniform(1.2, 2.0)
    l2 = rng.uniform(0.6, 1.2)
    t = rng.uniform(0.3, 0.8)
    d = g.polar(l2, math.radians(_sample_angle(rng, 40.0, 140.0)))
    return _in_frame([(0.0, 0.0), (l1, 0.0), (d[0] + t * l1, d[1]), d], rng)


def _place_midpoint(args, rng):
    return [g.midpoint(*args)]


def _place_circumcenter(args, rng):
    o = g.circumcenter(*args)
    if o is None:
        raise _Degenerate("collinear points have no circumcircle")
    return [o]


def _triangle_area2(a, b, c):
    return abs(g.cross(g.sub(b, a), g.sub(c, a)))


def _place_incenter(args, rng):
    if _triangle_area2(*args) <= 1e-12:
        raise _Degenerate("collinear points have no incircle")
    return [g.incenter(*args)]


def _place_centroid(args, rng):
    return [g.centroid(args)]


def _place_orthocenter(args, rng):
    h = g.orthocenter(*args)
    if h is None:
        raise _Degenerate("collinear points have no orthocenter")
    return [h]


def _place_foot(args, rng):
    c, a, b = args
    return [g.foot(c, a, b)]


def _signed(rng, lo, hi):
    t = rng.uniform(lo, hi)
    return t if rng.random() < 0.5 else -t


def _place_parallel_through(args, rng):
    a, b, c = args
    return [g.add(a, g.scale(g.sub(c, b), _signed(rng, 0.4, 1.2)))]


def _place_perp_through(args, rng):
    a, b = args
    return [g.add(a, g.scale(g.rot90(g.sub(b, a)), _signed(rng, 0.4, 1.2)))]


def _place_angle_bisector(args, rng):
    a, b, c = args
    ba, bc = g.sub(a, b), g.sub(c, b)
    direction = g.add(g.unit(ba), g.unit(bc))
    if g.norm(direction) < 1e-9:
        raise _Degenerate("straight angle")
    reach = 0.5 * (g.norm(ba) + g.norm(bc)) * rng.uniform(0.5, 1.2)
    return [g.add(b, g.scale(g.unit(direction), reach))]


def _place_angle_mirror(args, rng):
    a, b, c = args
    return [g.reflect_across_line(c, a, b)]


def _place_reflect_line(args, rng):
    c, a, b = args
    return [g.reflect_across_line(c, a, b)]


def _place_reflect_point(args, rng):
    c, m = args
    return [(2.0 * m[0] - c[0], 2.0 * m[1] - c[1])]


def _place_on_circle(args, rng):
    o, a = args
    return [g.add(o, g.polar(g.dist(o, a), rng.uniform(0.0, 2.0 * math.pi)))]


def _place_intersect_ll(args, rng):
    x = g.line_intersection(*args)
    if x is None:
        raise _NoSolution("lines are parallel")
    return [x]


def _place_intersect_lc(args, rng):
    a, b, o, c = args
    roots = g.line_circle_intersections(a, b, o, g.dist(o, c))
    if not roots:
        raise _NoSolution("line misses circle")
    return [roots[int(rng.integers(2))]]


def _place_eqdistance(args, rng):
    a, b, c = args
    return [g.add(a, g.polar(g.dist(b, c), rng.uniform(0.0, 2.0 * math.pi)))]


# -- claims -------------------------------------------------------------------

def _sides(*names: str) -> tuple[Seg, ...]:
    n = len(names)
    return tuple((names[i], names[(i + 1) % n]) for i in range(n))


def _corners(*names: str) -> tuple[Angle, ...]:
    n = len(names)
    return tuple((names[i - 1], names[i], names[(i + 1) % n]) for i in range(n))


def _claims_free(new, args):
    return Claims()


def _claims_segment(new, args):
    return Claims(segments=(new,))


def _claims_triangle(new, args):
    return Claims(segments=_sides(*new), measured=_corners(*new))


def _claims_iso_triangle(new, args):
    a, b, c = new
    return Claims(segments=_sides(*new), seg_eq=(((a, b), (a, c)),),
                  angle_eq=(((a, b, c), (a, c, b)),), measured=_corners(*new))


def _claims_equilateral(new, args):
    return Claims(segments=_sides(*new), seg_eq=(_sides(*new),), measured=_corners(*new))


def _claims_square(new, args):
    return Claims(segments=_sides(*new), seg_eq=(_sides(*new),), measured=_corners(*new))


def _claims_parallelogram(new, args):
    a, b, c, d = new
    return Claims(segments=_sides(*new), parallel=(((a, b), (d, c)), ((a, d), (b, c))),
                  measured=_corners(*new))


def _claims_trapezoid(new, args):
    a, b, c, d = new
    return Claims(segments=_sides(*new), parallel=(((a, b), (d, c)),), measured=_corners(*new))


def _claims_midpoint(new, args):
    (m,), (a, b) = new, args
    return Claims(segments=((a, m), (m, b)), seg_eq=(((a, m), (m, b)),))


def _claims_circumcenter(new, args):
    (o,), (a, b, c) = new, args
    radii = ((o, a), (o, b), (o, c))
    return Claims(segments=radii, seg_eq=(radii,))


def _claims_incenter(new, args):
    (i,), (a, b, c) = new, args
    return Claims(segments=_sides(a, b, c) + ((a, i), (b, i), (c, i)),
                  angle_eq=(((b, a, i), (i, a, c)), ((a, b, i), (i, b, c)),
                            ((a, c, i), (i, c, b))))


def _claims_spokes(new, args):
    (x,) = new
    return Claims(segments=_sides(*args) + tuple((p, x) for p in args))


def _claims_foot(new, args):
    (f,), (c, a, b) = new, args
    return Claims(segments=((c, f),), right_angles=((c, f, a),), collinear=((a, f, b),))


def _claims_parallel_through(new, args):
    (x,), (a, b, c) = new, args
    return Claims(segments=((a, x), (b, c)), parallel=(((a, x), (b, c)),))


def _claims_perp_through(new, args):
    (x,), (a, b) = new, args
    return Claims(segments=((a, x), (a, b)), right_angles=((x, a, b),))


def _claims_angle_bisector(new, args):
    (x,), (a, b, c) = new, args
    return Claims(segments=((b, a), (b, c), (b, x)), angle_eq=(((a, b, x), (x, b, c)),))


def _claims_angle_mirror(new, args):
    (x,), (a, b, c) = new, args
    return Claims(segments=((b, a), (b, c), (b, x)), angle_eq=(((a, b, c), (a, b, x)),))


def _claims_reflect_line(new, args):
    (x,), (c, a, b) = new, args
    return Claims(segments=((a, b), (a, c), (a, x), (b, c), (b, x)),
                  seg_eq=(((a, c), (a, x)), ((b, c), (b, x))))


def _claims_reflect_point(new, args):
    (x,), (c, m) = new, args
    return Claims(segments=((c, m), (m, x)), seg_eq=(((c, m), (m, x)),), collinear=((c, m, x),))


def _claims_on_circle(new, args):
    (x,), (o, a) = new, args
    return Claims(circles=((o, a),), on_circle=((o, (a, x)),))


def _claims_intersect_ll(new, args):
    (x,), (a, b, c, d) = new, args
    return Claims(collinear=((a, b, x), (c, d, x)), crossings=(((a, b), (c, d)),))


def _claims_intersect_lc(new, args):
    (x,), (a, b, o, c) = new, args
    return Claims(circles=((o, c),), collinear=((a, b, x),), on_circle=((o, (c, x)),))


def _claims_eqdistance(new, args):
    (x,), (a, b, c) = new, args
    return Claims(segments=((a, x), (b, c)), seg_eq=(((a, x), (b, c)),))


PROCEDURES: dict[str, Construction] = {
    "free": Construction(_place_free, _claims_free, True),
    "segment": Construction(_place_segment, _claims_segment, True),
    "triangle": Construction(_place_triangle, _claims_triangle, True),
    "iso_triangle": Construction(_place_iso_triangle, _claims_iso_triangle, True),
    "equilateral": Construction(_place_equilateral, _claims_equilateral, True),
    "square": Construction(_place_square, _claims_square, True),
    "parallelogram": Construction(_place_parallelogram, _claims_parallelogram, True),
    "trapezoid": Construction(_place_trapezoid, _claims_trapezoid, True),
    "midpoint": Construction(_place_midpoint, _claims_midpoint, False),
    "circumcenter": Construction(_place_circumcenter, _claims_circumcenter, False),
    "incenter": Construction(_place_incenter, _claims_incenter, False),
    "centroid": Construction(_place_centroid, _claims_spokes, False),
    "orthocenter": Construction(_place_orthocenter, _claims_spokes, False),
    "foot": Construction(_place_foot, _claims_foot, False),
    "parallel_through": Construction(_place_parallel_through, _claims_parallel_through, True),
    "perp_through": Construction(_place_perp_through, _claims_perp_through, True),
    "angle_bisector": Construction(_place_angle_bisector, _claims_angle_bisector, True),
    "angle_mirror": Construction(_place_angle_mirror, _claims_angle_mirror, False),
    "reflect_line": Construction(_place_reflect_line, _claims_reflect_line, False),
    "reflect_point": Construction(_place_reflect_point, _claims_reflect_point, False),
    "on_circle": Construction(_place_on_circle, _claims_on_circle, True),
    "intersect_ll": Construction(_place_intersect_ll, _claims_intersect_ll, False),
    "intersect_lc": Construction(_place_intersect_lc, _claims_intersect_lc, True),
    "eqdistance": Construction(_place_eqdistance, _claims_eqdistance, True),
}


def procedure_for(clause: Clause, registry: RelationRegistry = REGISTRY) -> Construction:
    rel = registry.lookup(clause.relation)
    return PROCEDURES[rel.construction_id]


# -- scenes -------------------------------------------------------------------

@dataclass(frozen=True)
class Scene:
    points: dict[str, Point]
    history: ClauseList = ()
    seed: int = 0
    segments: tuple[Seg, ...] = ()
    lines: tuple[tuple[str, ...], ...] = ()
    circles: tuple[tuple[str, str], ...] = ()
    length_scale: float = 1.0
    length_labels: tuple[Seg, ...] = ()

    @property
    def names(self) -> list[str]:
        return list(self.points)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "seed": int(self.seed),
            "history": print_program(self.history),
            "points": {k: [x, y] for k, (x, y) in self.points.items()},
            "length_scale": self.length_scale,
            "length_labels": [list(s) for s in self.length_labels],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scene":
        if d.get("version", 1) != 1:
            raise ValueError(f"unsupported scene version {d.get('version')!r}")
        history = parse_program(d["history"]) if d.get("history") else ()
        scene = cls(points={}, seed=int(d["seed"]))
        for clause in history:
            scene = _extend(scene, clause, procedure_for(clause).claims(clause.new_points, clause.args),
                            {n: tuple(d["points"][n]) for n in clause.new_points})
        return replace(scene, length_scale=float(d.get("length_scale", 1.0)),
                       length_labels=tuple(tuple(s) for s in d.get("length_labels", ())))


def _extend(scene: Scene, clause: Clause, claims: Claims, new_points: Mapping[str, Point]) -> Scene:
    points = dict(scene.points)
    points.update(new_points)
    segments = list(scene.segments)
    for s in claims.segments:
        s = canon_seg(s)
        if s not in segments:
            segments.append(s)
    circles = list(scene.circles)
    for c in claims.circles:
        if c not in circles:
            circles.append(c)
    return replace(scene, points=points, history=scene.history + (clause,),
                   segments=tuple(segments), lines=scene.lines + claims.collinear,
                   circles=tuple(circles))


def _measure_deg(points: Mapping[str, Point], angle: Angle) -> float:
    p, v, q = angle
    return math.degrees(g.angle_at(points[v], points[p], points[q]))


def _grid_angle(deg: float) -> Optional[int]:
    """Nearest 15-degree multiple in [15, 165] when within the snap tolerance."""
    k = int(round(deg / ANGLE_GRID)) * ANGLE_GRID
    if ANGLE_GRID <= k <= 180 - ANGLE_GRID and abs(deg - k) <= ANGLE_SNAP_TOL:
        return k
    return None


def _claim_facts(claims: Claims, points: Mapping[str, Point]) -> list[Fact]:
    """Unindexed facts asserted by a single clause, for admission checks."""
    out: list[Fact] = []
    out += [SegmentEq(0, grp) for grp in claims.seg_eq]
    out += [AngleEq(0, grp) for grp in claims.angle_eq]
    out += [Parallel(0, grp) for grp in claims.parallel]
    out += [RightAngle(a) for a in claims.right_angles]
    out += [Collinear(c) for c in claims.collinear]
    out += [OnCircle(o, pts) for o, pts in claims.on_circle]
    for a in claims.measured:
        k = _grid_angle(_measure_deg(points, a))
        if k == 90:
            out.append(RightAngle(a))
        elif k is not None:
            out.append(AngleValue(a, k))
    return out


def _extent(points: Mapping[str, Point], circles: Iterable[tuple[str, str]]) -> float:
    xs = [p[0] for p in points.values()]
    ys = [p[1] for p in points.values()]
    for o, a in circles:
        r = g.dist(points[o], points[a])
        cx, cy = points[o]
        xs += [cx - r, cx + r]
        ys += [cy - r, cy + r]
    return max(max(xs) - min(xs), max(ys) - min(ys))


def _admission(points: Mapping[str, Point], new_names: Sequence[str], claims: Claims,
               circles: Iterable[tuple[str, str]]) -> Optional[str]:
    """Reason the clause placement is rejected, or None when admissible."""
    for n in new_names:
        x, y = points[n]
        if not (math.isfinite(x) and math.isfinite(y)):
            return f"non-finite coordinate for {n}"
    for n in new_names:
        p = points[n]
        for m, q in points.items():
            if m != n and g.dist(p, q) < EPS_DIST:
                return f"points {n} and {m} closer than {EPS_DIST}"
    if _extent(points, circles) > MAX_EXTENT:
        return "scene extent too large"
    angles = [a for grp in claims.angle_eq for a in grp] + list(claims.measured)
    for a in angles:
        deg = _measure_deg(points, a)
        if not (MIN_ANGLE_DEG <= deg <= 180.0 - MIN_ANGLE_DEG):
            return f"angle {''.join(a)} = {deg:.3f} outside legible range"
    for a in claims.measured:
        deg = _measure_deg(points, a)
        off = abs(deg - ANGLE_GRID * round(deg / ANGLE_GRID))
        if EXACT_ANGLE_TOL < off <= ANGLE_SNAP_TOL:
            return f"angle {''.join(a)} = {deg:.4f} is ambiguously close to a labelled value"
    for (a, b), (c, d) in claims.crossings:
        u = g.sub(points[b], points[a])
        v = g.sub(points[d], points[c])
        deg = math.degrees(math.atan2(abs(g.cross(u, v)), abs(g.dot(u, v))))
        if deg < MIN_ANGLE_DEG:
            return f"lines {a}{b} and {c}{d} cross at {deg:.3f} degrees"
    for f in _claim_facts(claims, points):
        r = _residual(points, f, 1.0)
        if not r < RESIDUAL_TOL:
            return f"{f.kind} residual {r:.3g}"
    return None


def apply_relation(scene: Scene, clause: Clause, rng: np.random.Generator,
                   fixed: Optional[Mapping[str, Point]] = None,
                   registry: RelationRegistry = REGISTRY) -> Scene:
    """Add the points of one clause to `scene`.

    Free parameters are resampled up to MAX_ATTEMPTS times. `fixed` pins the
    coordinates of the clause's new points instead of sampling them.
    """
    report = validate_clause(clause, scene.points, registry)
    if report:
        raise report.violations[0].to_error()
    proc = procedure_for(clause, registry)
    claims = proc.claims(clause.new_points, clause.args)
    args = [scene.points[a] for a in clause.args]
    circles = list(scene.circles) + [c for c in claims.circles if c not in scene.circles]
    attempts = MAX_ATTEMPTS if proc.free and not fixed else 1
    reason = "no attempts made"
    for _ in range(attempts):
        if fixed:
            placed = [tuple(map(float, fixed[n])) for n in clause.new_points]
        else:
            try:
                placed = proc.place(args, rng)
            except _NoSolution as exc:
                raise NumericFailure(clause, str(exc)) from None
            except _Degenerate as exc:
                reason = str(exc)
                continue
        new_points = dict(zip(clause.new_points, placed))
        points = dict(scene.points)
        points.update(new_points)
        reason = _admission(points, clause.new_points, claims, circles)
        if reason is None:
            return _extend(scene, clause, claims, new_points)
    raise DegenerateConstruction(clause, reason)


def _choose_length_labels(scene: Scene, rng: np.random.Generator) -> Scene:
    scale = float(rng.uniform(*LENGTH_SCALE_RANGE))
    want = 1 + int(rng.random() < 0.5)
    n = len(scene.segments)
    if n == 0:
        return replace(scene, length_scale=scale)
    idx = sorted(int(i) for i in rng.choice(n, size=min(want, n), replace=False))
    return replace(scene, length_scale=scale, length_labels=tuple(scene.segments[i] for i in idx))


def construct_scene(program: ClauseList, seed: int,
                    fixed: Optional[Mapping[str, Point]] = None,
                    registry: RelationRegistry = REGISTRY) -> Scene:
    """Instantiate `program` numerically; deterministic in (program, seed, fixed).

    On a rejected clause the whole scene is rebuilt with fresh free
    parameters, up to SCENE_RETRIES times.
    """
    if isinstance(program, str):
        program = parse_program(program, registry)
    fixed = dict(fixed or {})
    for clause in program:
        pinned = [n in fixed for n in clause.new_points]
        if any(pinned) and not all(pinned):
            raise ValueError(f"fix all or none of the new points of {clause}")
    rng = np.random.default_rng(seed)
    last: Optional[ConstructionError] = None
    for _ in range(SCENE_RETRIES):
        scene = Scene(points={}, seed=seed)
        try:
            for clause in program:
                pins = {n: fixed[n] for n in clause.new_points} if clause.new_points[0] in fixed else None
                scene = apply_relation(scene, clause, rng, pins, registry)
        except (DegenerateConstruction, NumericFailure) as exc:
            last = exc
            continue
        return _choose_length_labels(scene, rng)
    assert last is not None
    raise last


# -- sampling -----------------------------------------------------------------

_BASES = {"segment": 2, "triangle": 3, "iso_triangle": 3, "equilateral": 3,
          "square": 4, "parallelogram": 4, "trapezoid": 4}
_BASE_WEIGHTS = {"segment": 0.5, "triangle": 3.0, "iso_triangle": 1.5, "equilateral": 1.0,
                 "square": 1.0, "parallelogram": 1.0, "trapezoid": 1.0}
_EXTENSION_WEIGHTS = {
    "midpoint": 2.0, "circumcenter": 1.0, "incenter": 1.0, "centroid": 0.7,
    "orthocenter": 0.5, "foot": 1.5, "parallel_through": 1.2, "perp_through": 1.2,
    "angle_bisector": 1.2, "angle_mirror": 1.0, "reflect_line": 0.6, "reflect_point": 0.8,
    "on_circle": 1.0, "intersect_ll": 0.8, "intersect_lc": 0.6, "eqdistance": 0.8, "free": 0.1,
}


def point_names() -> Iterable[str]:
    """a, b, ..., z, a1, ..., z1, a2, ..."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    yield from letters
    k = 1
    while True:
        for ch in letters:
            yield f"{ch}{k}"
        k += 1


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _distinct(rng, pool, k, exclude=()):
    pool = [p for p in pool if p not in exclude]
    if len(pool) < k:
        return None
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[int(i)] for i in idx]


def _choose_args(relation: str, points: list[str], segments: list[Seg], base: list[str],
                 rng) -> Optional[tuple[str, ...]]:
    """Pick argument points for `relation`, favouring drawn segments and the base figure."""
    def seg_then(k_extra):
        if segments and rng.random() < 0.8:
            s = list(_pick(rng, segments))
            if rng.random() < 0.5:
                s.reverse()
            extra = _distinct(rng, points, k_extra, exclude=s)
            if extra is not None:
                return s, extra
        pts = _distinct(rng, points, 2 + k_extra)
        return (pts[:2], pts[2:]) if pts else (None, None)

    if relation in ("circumcenter", "incenter", "centroid", "orthocenter"):
        if len(base) >= 3 and rng.random() < 0.7:
            return tuple(_distinct(rng, base, 3))
        pts = _distinct(rng, points, 3)
        return tuple(pts) if pts else None
    if relation in ("midpoint", "perp_through"):
        s, _ = seg_then(0)
        return tuple(s) if s else None
    if relation in ("foot", "reflect_line"):
        s, extra = seg_then(1)
        return (extra[0], *s) if s else None
    if relation in ("parallel_through", "eqdistance"):
        s, extra = seg_then(1)
        return (extra[0], *s) if s else None
    if relation in ("angle_bisector", "angle_mirror"):
        corners = []
        for i, s in enumerate(segments):
            for t in segments[i + 1:]:
                shared = set(s) & set(t)
                if len(shared) == 1:
                    (v,) = shared
                    corners.append((s[0] if s[1] == v else s[1], v, t[0] if t[1] == v else t[1]))
        if corners and rng.random() < 0.8:
            p, v, q = _pick(rng, corners)
            return (p, v, q) if rng.random() < 0.5 else (q, v, p)
        pts = _distinct(rng, points, 3)
        return tuple(pts) if pts else None
    if relation == "intersect_ll":
        pairs = [(s, t) for i, s in enumerate(segments) for t in segments[i + 1:]
                 if not set(s) & set(t)]
        if pairs and rng.random() < 0.8:
            s, t = _pick(rng, pairs)
            return (*s, *t)
        pts = _distinct(rng, points, 4)
        return tuple(pts) if pts else None
    if relation == "intersect_lc":
        s, extra = seg_then(2)
        return (*s, *extra) if s else None
    if relation in ("reflect_point", "on_circle"):
        pts = _distinct(rng, points, 2)
        return tuple(pts) if pts else None
    if relation == "free":
        return ()
    raise KeyError(relation)


def sample_program(difficulty: str, seed: int, registry: RelationRegistry = REGISTRY,
                   max_retries: int = 50) -> ClauseList:
    """Sample a structurally valid program whose clause count suits `difficulty`."""
    if difficulty not in DIFFICULTY_CLAUSES:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = np.random.default_rng(seed)
    lo, hi = DIFFICULTY_CLAUSES[difficulty]
    for _ in range(max_retries):
        n = int(rng.integers(lo, hi + 1))
        bases = list(_BASES)
        if difficulty == "easy":
            bases = [b for b in bases if _BASES[b] + (n - 1) <= EASY_MAX_POINTS]
        weights = np.array([_BASE_WEIGHTS[b] for b in bases])
        base_rel = bases[int(rng.choice(len(bases), p=weights / weights.sum()))]
        names = point_names()
        base = [next(names) for _ in range(_BASES[base_rel])]
        clauses = [Clause(base_rel, tuple(base))]
        points = list(base)
        segments = [canon_seg(s) for s in PROCEDURES[base_rel].claims(tuple(base), ()).segments]
        ext = list(_EXTENSION_WEIGHTS)
        ext_w = np.array([_EXTENSION_WEIGHTS[r] for r in ext])
        ok = True
        while len(clauses) < n:
            rel = ext[int(rng.choice(len(ext), p=ext_w / ext_w.sum()))]
            if registry.lookup(rel).arg_count > len(points):
                continue
            args = _choose_args(rel, points, segments, base, rng)
            if args is None:
                continue
            new = next(names)
            clause = Clause(rel, (new,), tuple(args))
            if validate_clause(clause, points, registry):
                ok = False
                break
            clauses.append(clause)
            points.append(new)
            for s in PROCEDURES[rel].claims(clause.new_points, clause.args).segments:
                s = canon_seg(s)
                if s not in segments:
                    segments.append(s)
        if ok:
            return tuple(clauses)
    raise ExhaustedRetries(f"no valid {difficulty} program after {max_retries} tries")


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit child seed."""
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), *path]).generate_state(2, np.uint32)
    return int(state[0]) << 31 ^ int(state[1])


def generate_scene(difficulty: str, seed: int, registry: RelationRegistry = REGISTRY) -> Scene:
    """Sample a program and instantiate it, resampling the program on failure."""
    last: Optional[Exception] = None
    for attempt in range(PROGRAM_RETRIES):
        program = sample_program(difficulty, derive_seed(seed, attempt, 0), registry)
        try:
            return construct_scene(program, derive_seed(seed, attempt, 1), registry=registry)
        except ConstructionError as exc:
            last = exc
    raise ExhaustedRetries(f"no constructible {difficulty} scene for seed {seed}: {last}")


# -- facts --------------------------------------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union_all(self, items):
        items = list(items)
        root = self.find(items[0])
        for it in items[1:]:
            r = self.find(it)
            if r != root:
                self.parent[r] = root

    def groups(self) -> list[list]:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return [sorted(v) for v in out.values()]


def _order_along_line(points: Mapping[str, Point], names: Iterable[str]) -> tuple[str, ...]:
    names = sorted(set(names))
    best = (-1.0, names[0], names[-1])
    for i, p in enumerate(names):
        for q in names[i + 1:]:
            d = g.dist(points[p], points[q])
            if d > best[0]:
                best = (d, p, q)
    origin = points[best[1]]
    direction = g.sub(points[best[2]], origin)
    ordered = sorted(names, key=lambda n: g.dot(g.sub(points[n], origin), direction))
    return tuple(ordered)


def _merge_collinear(groups: list[set[str]]) -> list[set[str]]:
    groups = [set(s) for s in groups]
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if len(groups[i] & groups[j]) >= 2:
                    groups[i] |= groups.pop(j)
                    merged = True
                    break
            if merged:
                break
    return groups


def extract_facts(scene: Scene, registry: RelationRegistry = REGISTRY) -> FactSet:
    """Canonical fact set implied by the clause history plus length labels."""
    pts = scene.points
    seg_uf, ang_uf, par_uf = _UnionFind(), _UnionFind(), _UnionFind()
    circles: dict[str, _UnionFind] = {}
    rights: set[Angle] = set()
    values: dict[Angle, int] = {}
    collinear: list[set[str]] = []
    for clause in scene.history:
        claims = procedure_for(clause, registry).claims(clause.new_points, clause.args)
        for grp in claims.seg_eq:
            seg_uf.union_all(canon_seg(s) for s in grp)
        for grp in claims.angle_eq:
            ang_uf.union_all(canon_angle(a) for a in grp)
        for grp in claims.parallel:
            par_uf.union_all(canon_seg(s) for s in grp)
        for o, members in claims.on_circle:
            circles.setdefault(o, _UnionFind()).union_all(members)
        rights.update(canon_angle(a) for a in claims.right_angles)
        collinear.extend(set(c) for c in claims.collinear)
        for a in claims.measured:
            k = _grid_angle(_measure_deg(pts, a))
            if k == 90:
                rights.add(canon_angle(a))
            elif k is not None:
                values[canon_angle(a)] = k
    facts: list[Fact] = [SegmentPresent(s) for s in scene.segments]
    for s in scene.length_labels:
        facts.append(SegmentLength(s, round(g.dist(pts[s[0]], pts[s[1]]) * scene.length_scale, 2)))
    facts += [SegmentEq(0, tuple(grp)) for grp in seg_uf.groups()]
    facts += [AngleEq(0, tuple(grp)) for grp in ang_uf.groups()]
    facts += [Parallel(0, tuple(grp)) for grp in par_uf.groups()]
    facts += [RightAngle(a) for a in rights]
    facts += [AngleValue(a, k) for a, k in values.items()]
    facts += [Collinear(_order_along_line(pts, grp)) for grp in _merge_collinear(collinear)]
    for o in sorted(circles):
        facts += [OnCircle(o, tuple(grp)) for grp in circles[o].groups()]
    mentioned: set[str] = set()
    for f in facts:
        mentioned |= f.point_names()
    facts += [PointPresent(n) for n in pts if n not in mentioned]
    return canonicalize(facts)


# -- residuals ----------------------------------------------------------------

def _len(points, s):
    return g.dist(points[s[0]], points[s[1]])


def _angle(points, a):
    p, v, q = a
    return g.angle_at(points[v], points[p], points[q])


def _residual(points: Mapping[str, Point], fact: Fact, length_scale: float) -> float:
    if isinstance(fact, SegmentEq):
        lens = [_len(points, s) for s in fact.segments]
        return max(lens) - min(lens)
    if isinstance(fact, AngleEq):
        angs = [_angle(points, a) for a in fact.angles]
        return max(angs) - min(angs)
    if isinstance(fact, AngleValue):
        return abs(_angle(points, fact.angle) - math.radians(fact.degrees))
    if isinstance(fact, RightAngle):
        p, v, q = fact.angle
        u = g.unit(g.sub(points[p], points[v]))
        w = g.unit(g.sub(points[q], points[v]))
        return abs(g.dot(u, w))
    if isinstance(fact, Parallel):
        dirs = [g.unit(g.sub(points[b], points[a])) for a, b in fact.lines]
        return max((abs(g.cross(u, v)) for i, u in enumerate(dirs) for v in dirs[i + 1:]),
                   default=0.0)
    if isinstance(fact, Collinear):
        a, b = points[fact.points[0]], points[fact.points[1]]
        return max((g.point_line_distance(points[n], a, b) for n in fact.points[2:]), default=0.0)
    if isinstance(fact, OnCircle):
        c = points[fact.center]
        radii = [g.dist(c, points[n]) for n in fact.points]
        return max(radii) - min(radii)
    if isinstance(fact, SegmentLength):
        return max(0.0, abs(_len(points, fact.segment) * length_scale - fact.length) - 0.005)
    if isinstance(fact, (SegmentPresent, PointPresent)):
        missing = fact.point_names() - set(points)
        return math.inf if missing else 0.0
    raise TypeError(f"unsupported fact {fact!r}")


def residual(scene: Scene, fact: Fact) -> float:
    """Non-negative violation measure, 0 exactly when `fact` holds in `scene`.

    Lengths and distances are in scene units, angle differences in radians,
    right angles and parallelism as |cos| and |sin| of the relevant angle.
    A SegmentLength is satisfied when its 2-decimal value is a correct
    rounding of the scaled length.
    """
    return _residual(scene.points, fact, scene.length_scale)
