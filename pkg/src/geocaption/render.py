"""Annotated SVG diagrams.

Every fact is drawn as exactly one ``<g data-fact="...">`` group:

========================  ==========================================
fact                      marker
========================  ==========================================
SegmentEq (class k)       k perpendicular ticks on each member
AngleEq (class k)         k concentric arcs at each member vertex
AngleValue                degree label near the vertex
Parallel (class k)        k directional triangles on each member
RightAngle                square at the vertex
Collinear                 dashed line through the points
SegmentLength             numeric label beside the segment
OnCircle                  the circle itself
SegmentPresent            the segment itself
PointPresent              the point and its label
========================  ==========================================

Marker sizes are fractions of the canvas size.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields, replace
from typing import Iterable, Mapping, Optional

import numpy as np

from . import geometry as g
from .construction import Scene
from .facts import (AngleEq, AngleValue, Collinear, Fact, FactSet, OnCircle, Parallel,
                    PointPresent, RightAngle, SegmentEq, SegmentLength, SegmentPresent,
                    canon_seg, sort_key)
from .geometry import Point

SVG_NS = "http://www.w3.org/2000/svg"


class UnresolvedReference(ValueError):
    def __init__(self, fact: Fact, missing: Iterable[str]):
        super().__init__(f"{fact.tag} refers to unknown points {sorted(missing)}")
        self.fact = fact


class ContractViolation(ValueError):
    """A fact that the extractor should never have produced."""


@dataclass(frozen=True)
class StyleConfig:
    canvas_size: int = 512
    margin: float = 0.12
    stroke_width: float = 2.0
    marker_width: float = 1.6
    point_radius: float = 3.0
    font_size: float = 16.0
    small_font_size: float = 13.0
    font_family: str = "DejaVu Sans, Arial, sans-serif"
    tick_length: float = 0.04
    tick_spacing: float = 0.015
    arc_radius: float = 0.06
    arc_step: float = 0.02
    right_size: float = 0.03
    triangle_size: float = 0.014
    label_offset: float = 0.04
    dash: tuple[float, float] = (6.0, 4.0)
    background: str = "#ffffff"
    line_color: str = "#222222"
    point_color: str = "#000000"
    text_color: str = "#000000"
    tick_color: str = "#e75480"
    arc_color: str = "#d62728"
    parallel_color: str = "#1f77b4"
    right_color: str = "#2ca02c"
    dash_color: str = "#7f7f7f"
    circle_color: str = "#444444"
    length_color: str = "#1f3d7a"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not v > 0:
                raise ValueError(f"style field {f.name} must be positive, got {v}")
        if not all(d > 0 for d in self.dash):
            raise ValueError("dash pattern must be positive")

    @property
    def px(self) -> float:
        return float(self.canvas_size)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["dash"] = list(self.dash)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StyleConfig":
        d = dict(d)
        if "dash" in d:
            d["dash"] = tuple(d["dash"])
        return cls(**d)


_PALETTES = (
    {},
    {"tick_color": "#c2185b", "arc_color": "#b71c1c", "parallel_color": "#0d47a1",
     "right_color": "#1b5e20", "line_color": "#000000"},
    {"tick_color": "#ff4081", "arc_color": "#e53935", "parallel_color": "#3949ab",
     "right_color": "#43a047", "line_color": "#333333", "background": "#fcfcf7"},
    {"tick_color": "#ad1457", "arc_color": "#ef6c00", "parallel_color": "#00838f",
     "right_color": "#6a1b9a", "line_color": "#263238"},
)


def sample_style(rng: np.random.Generator, base: StyleConfig = StyleConfig()) -> StyleConfig:
    """Seeded variation of colours, font sizes and line thicknesses."""
    palette = _PALETTES[int(rng.integers(len(_PALETTES)))]
    return replace(base, **palette,
                   stroke_width=round(float(rng.uniform(1.5, 3.0)), 2),
                   marker_width=round(float(rng.uniform(1.2, 2.2)), 2),
                   font_size=float(rng.integers(14, 21)),
                   point_radius=round(float(rng.uniform(2.5, 4.0)), 2))


@dataclass(frozen=True)
class AnnotationPlan:
    marker: str
    multiplicity: int


_MARKERS = {
    "SegmentPresent": "segment", "SegmentLength": "length_label", "SegmentEq": "tick",
    "AngleEq": "arc", "AngleValue": "angle_label", "RightAngle": "square",
    "Parallel": "triangle", "Collinear": "dashed_line", "OnCircle": "circle",
    "PointPresent": "point_label",
}


def annotation_plan(fact: Fact) -> AnnotationPlan:
    if isinstance(fact, AngleValue):
        d = fact.degrees
        if d % 15 or not 15 <= d <= 165 or d == 90:
            raise ContractViolation(f"angle value {d} cannot be labelled")
    multiplicity = fact.index if fact.is_class else 1
    if multiplicity < 1:
        raise ContractViolation(f"class index must be >= 1 in {fact!r}")
    return AnnotationPlan(_MARKERS[fact.kind], multiplicity)


@dataclass(frozen=True)
class SvgDocument:
    text: str
    warnings: tuple[str, ...] = ()

    def __str__(self) -> str:
        return self.text


class _Frame:
    """Maps scene coordinates onto the canvas (y axis flipped)."""

    def __init__(self, scene: Scene, style: StyleConfig):
        pts = list(scene.points.values())
        xs = [p[0] for p in pts] or [0.0]
        ys = [p[1] for p in pts] or [0.0]
        for o, a in scene.circles:
            r = g.dist(scene.points[o], scene.points[a])
            cx, cy = scene.points[o]
            xs += [cx - r, cx + r]
            ys += [cy - r, cy + r]
        span = max(max(xs) - min(xs), max(ys) - min(ys))
        usable = style.px * (1.0 - 2.0 * style.margin)
        self.k = usable / span if span > 0 else 1.0
        self.cx = 0.5 * (max(xs) + min(xs))
        self.cy = 0.5 * (max(ys) + min(ys))
        self.half = style.px / 2.0

    def __call__(self, p: Point) -> Point:
        return (self.half + (p[0] - self.cx) * self.k, self.half - (p[1] - self.cy) * self.k)


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def layout_labels(scene: Scene, style: StyleConfig = StyleConfig()) -> dict[str, Point]:
    """Canvas position of each point label, pushed outward from the centroid."""
    frame = _Frame(scene, style)
    canvas = {n: frame(p) for n, p in scene.points.items()}
    if not canvas:
        return {}
    c = g.centroid(list(canvas.values()))
    offset = style.label_offset * style.px
    out = {}
    for n, p in canvas.items():
        d = g.sub(p, c)
        u = (1.0, 0.0) if g.norm(d) < 1e-9 else g.unit(d)
        out[n] = (p[0] + offset * u[0], p[1] + offset * u[1])
    return out


def _label_collisions(labels: Mapping[str, Point], style: StyleConfig) -> list[str]:
    names = list(labels)
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if g.dist(labels[a], labels[b]) < style.font_size:
                out.append(f"LabelCollision: {a.upper()} and {b.upper()}")
    return out


def _sub(parent, tag, **attrs) -> ET.Element:
    return ET.SubElement(parent, tag, {k.replace("_", "-"): v for k, v in attrs.items()})


class _Painter:
    def __init__(self, scene: Scene, style: StyleConfig):
        self.scene = scene
        self.style = style
        self.frame = _Frame(scene, style)
        self.pos = {n: self.frame(p) for n, p in scene.points.items()}
        self.center = g.centroid(list(self.pos.values())) if self.pos else (0.0, 0.0)
        self.labels = layout_labels(scene, style)

    def line(self, parent, p: Point, q: Point, color: str, width: float, cls: str, **extra):
        return _sub(parent, "line", x1=_f(p[0]), y1=_f(p[1]), x2=_f(q[0]), y2=_f(q[1]),
                    stroke=color, stroke_width=_f(width), **{"class": cls}, **extra)

    def text(self, parent, at: Point, body: str, color: str, size: float, cls: str):
        el = _sub(parent, "text", x=_f(at[0]), y=_f(at[1]), fill=color,
                  font_size=_f(size), font_family=self.style.font_family,
                  text_anchor="middle", dominant_baseline="central", **{"class": cls})
        el.text = body
        return el

    def segment(self, parent, seg):
        s = self.style
        self.line(parent, self.pos[seg[0]], self.pos[seg[1]], s.line_color, s.stroke_width, "segment",
                  stroke_linecap="round")

    def circle(self, parent, center: str, through: str):
        s = self.style
        c = self.pos[center]
        r = g.dist(c, self.pos[through])
        _sub(parent, "circle", cx=_f(c[0]), cy=_f(c[1]), r=_f(r), fill="none",
             stroke=s.circle_color, stroke_width=_f(s.stroke_width), **{"class": "circle"})

    def point(self, parent, name: str):
        s = self.style
        p = self.pos[name]
        _sub(parent, "circle", cx=_f(p[0]), cy=_f(p[1]), r=_f(s.point_radius), fill=s.point_color,
             **{"class": "point"})
        self.text(parent, self.labels[name], name.upper(), s.text_color, s.font_size, "point-label")

    def ticks(self, parent, seg, count: int):
        s = self.style
        p, q = self.pos[seg[0]], self.pos[seg[1]]
        u = g.unit(g.sub(q, p))
        n = g.rot90(u)
        m = g.midpoint(p, q)
        half = 0.5 * s.tick_length * s.px
        gap = s.tick_spacing * s.px
        for j in range(count):
            c = g.add(m, g.scale(u, (j - (count - 1) / 2.0) * gap))
            self.line(parent, g.sub(c, g.scale(n, half)), g.add(c, g.scale(n, half)),
                      s.tick_color, s.marker_width, "tick")

    def arcs(self, parent, angle, count: int):
        s = self.style
        p, v, q = (self.pos[x] for x in angle)
        u, w = g.unit(g.sub(p, v)), g.unit(g.sub(q, v))
        sweep = 1 if g.cross(u, w) > 0 else 0
        for j in range(count):
            r = (s.arc_radius + j * s.arc_step) * s.px
            a, b = g.add(v, g.scale(u, r)), g.add(v, g.scale(w, r))
            d = f"M {_f(a[0])} {_f(a[1])} A {_f(r)} {_f(r)} 0 0 {sweep} {_f(b[0])} {_f(b[1])}"
            _sub(parent, "path", d=d, fill="none", stroke=s.arc_color,
                 stroke_width=_f(s.marker_width), **{"class": "arc"})

    def _bisector(self, angle) -> tuple[Point, Point]:
        p, v, q = (self.pos[x] for x in angle)
        u, w = g.unit(g.sub(p, v)), g.unit(g.sub(q, v))
        b = g.add(u, w)
        b = g.rot90(u) if g.norm(b) < 1e-9 else g.unit(b)
        return v, b

    def angle_label(self, parent, angle, degrees: int):
        s = self.style
        v, b = self._bisector(angle)
        r = (s.arc_radius + 0.045) * s.px
        self.text(parent, g.add(v, g.scale(b, r)), f"{degrees}°", s.arc_color,
                  s.small_font_size, "angle-label")

    def square(self, parent, angle):
        s = self.style
        p, v, q = (self.pos[x] for x in angle)
        k = s.right_size * s.px
        a = g.add(v, g.scale(g.unit(g.sub(p, v)), k))
        c = g.add(v, g.scale(g.unit(g.sub(q, v)), k))
        b = g.add(a, g.sub(c, v))
        d = f"M {_f(a[0])} {_f(a[1])} L {_f(b[0])} {_f(b[1])} L {_f(c[0])} {_f(c[1])}"
        _sub(parent, "path", d=d, fill="none", stroke=s.right_color,
             stroke_width=_f(s.marker_width), **{"class": "right-angle"})

    def triangles(self, parent, seg, count: int, direction: Point):
        s = self.style
        p, q = self.pos[seg[0]], self.pos[seg[1]]
        u = g.unit(direction)
        n = g.rot90(u)
        h = s.triangle_size * s.px
        # offset from the midpoint so triangles do not sit on equality ticks
        base = g.add(g.midpoint(p, q), g.scale(u, 0.03 * s.px))
        for j in range(count):
            c = g.add(base, g.scale(u, j * 2.2 * h))
            tip = g.add(c, g.scale(u, h))
            l = g.add(g.sub(c, g.scale(u, h)), g.scale(n, 0.8 * h))
            r = g.sub(g.sub(c, g.scale(u, h)), g.scale(n, 0.8 * h))
            pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (tip, l, r))
            _sub(parent, "polygon", points=pts, fill=s.parallel_color, **{"class": "parallel-mark"})

    def dashed(self, parent, names):
        s = self.style
        p, q = self.pos[names[0]], self.pos[names[-1]]
        u = g.unit(g.sub(q, p))
        ext = 0.04 * s.px
        self.line(parent, g.sub(p, g.scale(u, ext)), g.add(q, g.scale(u, ext)), s.dash_color,
                  s.marker_width, "collinear", stroke_dasharray=f"{_f(s.dash[0])} {_f(s.dash[1])}")

    def length_label(self, parent, seg, length: float):
        s = self.style
        p, q = self.pos[seg[0]], self.pos[seg[1]]
        m = g.midpoint(p, q)
        n = g.rot90(g.unit(g.sub(q, p)))
        if g.dot(n, g.sub(m, self.center)) < 0:
            n = g.scale(n, -1.0)
        self.text(parent, g.add(m, g.scale(n, 0.035 * s.px)), f"{length:.2f}", s.length_color,
                  s.small_font_size, "length-label")


def _check_refs(scene: Scene, facts: Iterable[Fact]) -> None:
    known = set(scene.points)
    for f in facts:
        missing = f.point_names() - known
        if missing:
            raise UnresolvedReference(f, missing)


def _members_attr(members) -> str:
    return ",".join("-".join(m) for m in members)


def render_svg(scene: Scene, facts: FactSet, style: StyleConfig = StyleConfig()) -> SvgDocument:
    """Render `scene` with one annotation group per fact."""
    facts = tuple(facts)
    _check_refs(scene, facts)
    s = style
    paint = _Painter(scene, s)
    root = ET.Element("svg", {
        "xmlns": SVG_NS, "version": "1.1", "width": str(s.canvas_size),
        "height": str(s.canvas_size), "viewBox": f"0 0 {s.canvas_size} {s.canvas_size}",
    })
    _sub(root, "rect", x="0", y="0", width=str(s.canvas_size), height=str(s.canvas_size),
         fill=s.background)

    drawn_segments = {canon_seg(f.segment) for f in facts if isinstance(f, SegmentPresent)}
    drawn_circles = {(f.center, p) for f in facts if isinstance(f, OnCircle) for p in f.points}
    drawn_points = {f.name for f in facts if isinstance(f, PointPresent)}

    base = _sub(root, "g", id="base")
    for seg in scene.segments:
        if canon_seg(seg) not in drawn_segments:
            paint.segment(base, seg)
    for o, a in scene.circles:
        if (o, a) not in drawn_circles:
            paint.circle(base, o, a)

    for fact in facts:
        plan = annotation_plan(fact)
        grp = _sub(root, "g", data_fact=fact.tag)
        if isinstance(fact, SegmentPresent):
            paint.segment(grp, fact.segment)
        elif isinstance(fact, SegmentLength):
            grp.set("data-value", f"{fact.length:.2f}")
            paint.length_label(grp, fact.segment, fact.length)
        elif isinstance(fact, SegmentEq):
            grp.set("data-members", _members_attr(fact.segments))
            for seg in fact.segments:
                paint.ticks(grp, seg, plan.multiplicity)
        elif isinstance(fact, AngleEq):
            grp.set("data-members", _members_attr(fact.angles))
            for angle in fact.angles:
                paint.arcs(grp, angle, plan.multiplicity)
        elif isinstance(fact, AngleValue):
            grp.set("data-value", str(fact.degrees))
            paint.angle_label(grp, fact.angle, fact.degrees)
        elif isinstance(fact, RightAngle):
            paint.square(grp, fact.angle)
        elif isinstance(fact, Parallel):
            grp.set("data-members", _members_attr(fact.lines))
            ref = None
            for seg in fact.lines:
                d = g.sub(paint.pos[seg[1]], paint.pos[seg[0]])
                if ref is None:
                    ref = d
                elif g.dot(d, ref) < 0:
                    d = g.scale(d, -1.0)
                paint.triangles(grp, seg, plan.multiplicity, d)
        elif isinstance(fact, Collinear):
            paint.dashed(grp, fact.points)
        elif isinstance(fact, OnCircle):
            paint.circle(grp, fact.center, fact.points[0])
        elif isinstance(fact, PointPresent):
            paint.point(grp, fact.name)

    pts = _sub(root, "g", id="points")
    for name in scene.points:
        if name not in drawn_points:
            paint.point(pts, name)

    text = ET.tostring(root, encoding="unicode")
    return SvgDocument('<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n",
                       tuple(_label_collisions(paint.labels, s)))


def svg_fact_tags(svg: str | SvgDocument) -> list[str]:
    """All ``data-fact`` values in document order."""
    root = ET.fromstring(str(svg).split("\n", 1)[1] if str(svg).startswith("<?xml") else str(svg))
    return [el.get("data-fact") for el in root.iter() if el.get("data-fact") is not None]


def _split_members(attr: str) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(m.split("-")) for m in attr.split(","))


def facts_from_svg(svg: str | SvgDocument) -> FactSet:
    """Decode the annotation groups of a rendered diagram back into facts."""
    text = str(svg)
    root = ET.fromstring(text.split("\n", 1)[1] if text.startswith("<?xml") else text)
    out: list[Fact] = []
    for el in root.iter():
        tag = el.get("data-fact")
        if tag is None:
            continue
        if "#" in tag:
            kind, index = tag.split("#", 1)
            members = _split_members(el.get("data-members", ""))
            ctor = {"SegmentEq": SegmentEq, "AngleEq": AngleEq, "Parallel": Parallel}[kind]
            out.append(ctor(int(index), members))
            continue
        kind, args = tag.split("@", 1)
        if kind == "OnCircle":
            center, pts = args.split(":", 1)
            out.append(OnCircle(center, tuple(pts.split(","))))
            continue
        names = tuple(args.split(","))
        if kind == "SegmentPresent":
            out.append(SegmentPresent(names))
        elif kind == "SegmentLength":
            out.append(SegmentLength(names, round(float(el.get("data-value")), 2)))
        elif kind == "AngleValue":
            out.append(AngleValue(names, int(el.get("data-value"))))
        elif kind == "RightAngle":
            out.append(RightAngle(names))
        elif kind == "Collinear":
            out.append(Collinear(names))
        elif kind == "PointPresent":
            out.append(PointPresent(names[0]))
        else:
            raise ValueError(f"unknown data-fact {tag!r}")
    return tuple(sorted(out, key=sort_key))


def export_png(svg: str | SvgDocument, path, canvas_size: Optional[int] = None) -> None:
    """Rasterize to PNG. Needs the optional ``cairosvg`` package and libcairo."""
    try:
        import cairosvg
    except ImportError as exc:  # pragma: no cover - depends on system libraries
        raise RuntimeError("PNG export needs cairosvg (pip install cairosvg) and libcairo") from exc
    kw = {"output_width": canvas_size, "output_height": canvas_size} if canvas_size else {}
    cairosvg.svg2png(bytestring=str(svg).encode("utf-8"), write_to=str(path), **kw)
