"""Semantic facts: the relational assertions a diagram and its caption share.

Segments are ``(p, q)`` name pairs and angles are ``(p, vertex, q)`` triples.
Canonical form sorts segment endpoints and angle rays lexicographically so
fact sets compare with plain equality.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar, Iterable, Mapping

Seg = tuple[str, str]
Angle = tuple[str, str, str]


def canon_seg(seg: Iterable[str]) -> Seg:
    p, q = seg
    return (p, q) if p <= q else (q, p)


def canon_angle(angle: Iterable[str]) -> Angle:
    p, v, q = angle
    return (p, v, q) if p <= q else (q, v, p)


class Fact:
    kind: ClassVar[str]
    is_class: ClassVar[bool] = False

    @property
    def tag(self) -> str:
        """Value of the ``data-fact`` attribute for this fact."""
        if self.is_class:
            return f"{self.kind}#{self.index}"
        return f"{self.kind}@{self._args()}"

    def _args(self) -> str:
        raise NotImplementedError

    def point_names(self) -> set[str]:
        raise NotImplementedError

    def rename(self, mapping: Mapping[str, str]) -> "Fact":
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


def _join(names: Iterable[str]) -> str:
    return ",".join(names)


@dataclass(frozen=True)
class SegmentPresent(Fact):
    segment: Seg
    kind: ClassVar[str] = "SegmentPresent"

    def _args(self):
        return _join(self.segment)

    def point_names(self):
        return set(self.segment)

    def rename(self, m):
        return SegmentPresent(tuple(m[p] for p in self.segment))

    def to_dict(self):
        return {"kind": self.kind, "segment": list(self.segment)}


@dataclass(frozen=True)
class SegmentLength(Fact):
    # Endpoint order is kept as stated: "the length of BA" reads differently from AB.
    segment: Seg
    length: float
    kind: ClassVar[str] = "SegmentLength"

    def _args(self):
        return _join(self.segment)

    def point_names(self):
        return set(self.segment)

    def rename(self, m):
        return SegmentLength(tuple(m[p] for p in self.segment), self.length)

    def to_dict(self):
        return {"kind": self.kind, "segment": list(self.segment), "length": f"{self.length:.2f}"}


@dataclass(frozen=True)
class SegmentEq(Fact):
    index: int
    segments: tuple[Seg, ...]
    kind: ClassVar[str] = "SegmentEq"
    is_class: ClassVar[bool] = True

    @property
    def members(self):
        return self.segments

    def point_names(self):
        return {p for s in self.segments for p in s}

    def rename(self, m):
        return SegmentEq(self.index, tuple(tuple(m[p] for p in s) for s in self.segments))

    def to_dict(self):
        return {"kind": self.kind, "index": self.index, "segments": [list(s) for s in self.segments]}


@dataclass(frozen=True)
class AngleEq(Fact):
    index: int
    angles: tuple[Angle, ...]
    kind: ClassVar[str] = "AngleEq"
    is_class: ClassVar[bool] = True

    @property
    def members(self):
        return self.angles

    def point_names(self):
        return {p for a in self.angles for p in a}

    def rename(self, m):
        return AngleEq(self.index, tuple(tuple(m[p] for p in a) for a in self.angles))

    def to_dict(self):
        return {"kind": self.kind, "index": self.index, "angles": [list(a) for a in self.angles]}


@dataclass(frozen=True)
class AngleValue(Fact):
    angle: Angle
    degrees: int
    kind: ClassVar[str] = "AngleValue"

    def _args(self):
        return _join(self.angle)

    def point_names(self):
        return set(self.angle)

    def rename(self, m):
        return AngleValue(tuple(m[p] for p in self.angle), self.degrees)

    def to_dict(self):
        return {"kind": self.kind, "angle": list(self.angle), "degrees": self.degrees}


@dataclass(frozen=True)
class RightAngle(Fact):
    angle: Angle
    kind: ClassVar[str] = "RightAngle"

    def _args(self):
        return _join(self.angle)

    def point_names(self):
        return set(self.angle)

    def rename(self, m):
        return RightAngle(tuple(m[p] for p in self.angle))

    def to_dict(self):
        return {"kind": self.kind, "angle": list(self.angle)}


@dataclass(frozen=True)
class Parallel(Fact):
    index: int
    lines: tuple[Seg, ...]
    kind: ClassVar[str] = "Parallel"
    is_class: ClassVar[bool] = True

    @property
    def members(self):
        return self.lines

    def point_names(self):
        return {p for s in self.lines for p in s}

    def rename(self, m):
        return Parallel(self.index, tuple(tuple(m[p] for p in s) for s in self.lines))

    def to_dict(self):
        return {"kind": self.kind, "index": self.index, "lines": [list(s) for s in self.lines]}


@dataclass(frozen=True)
class Collinear(Fact):
    points: tuple[str, ...]
    kind: ClassVar[str] = "Collinear"

    def _args(self):
        return _join(self.points)

    def point_names(self):
        return set(self.points)

    def rename(self, m):
        return Collinear(tuple(m[p] for p in self.points))

    def to_dict(self):
        return {"kind": self.kind, "points": list(self.points)}


@dataclass(frozen=True)
class OnCircle(Fact):
    center: str
    points: tuple[str, ...]
    kind: ClassVar[str] = "OnCircle"

    def _args(self):
        return f"{self.center}:{_join(self.points)}"

    def point_names(self):
        return {self.center, *self.points}

    def rename(self, m):
        return OnCircle(m[self.center], tuple(m[p] for p in self.points))

    def to_dict(self):
        return {"kind": self.kind, "center": self.center, "points": list(self.points)}


@dataclass(frozen=True)
class PointPresent(Fact):
    name: str
    kind: ClassVar[str] = "PointPresent"

    def _args(self):
        return self.name

    def point_names(self):
        return {self.name}

    def rename(self, m):
        return PointPresent(m[self.name])

    def to_dict(self):
        return {"kind": self.kind, "name": self.name}


FACT_TYPES: dict[str, type[Fact]] = {
    cls.kind: cls for cls in (SegmentPresent, SegmentLength, SegmentEq, AngleEq, AngleValue,
                              RightAngle, Parallel, Collinear, OnCircle, PointPresent)
}
KIND_ORDER = {kind: i for i, kind in enumerate(FACT_TYPES)}
CLASS_KINDS = ("SegmentEq", "AngleEq", "Parallel")

FactSet = tuple[Fact, ...]


def fact_from_dict(d: Mapping[str, Any]) -> Fact:
    kind = d["kind"]
    if kind == "SegmentPresent":
        return SegmentPresent(tuple(d["segment"]))
    if kind == "SegmentLength":
        return SegmentLength(tuple(d["segment"]), round(float(d["length"]), 2))
    if kind == "SegmentEq":
        return SegmentEq(int(d["index"]), tuple(tuple(s) for s in d["segments"]))
    if kind == "AngleEq":
        return AngleEq(int(d["index"]), tuple(tuple(a) for a in d["angles"]))
    if kind == "AngleValue":
        return AngleValue(tuple(d["angle"]), int(d["degrees"]))
    if kind == "RightAngle":
        return RightAngle(tuple(d["angle"]))
    if kind == "Parallel":
        return Parallel(int(d["index"]), tuple(tuple(s) for s in d["lines"]))
    if kind == "Collinear":
        return Collinear(tuple(d["points"]))
    if kind == "OnCircle":
        return OnCircle(d["center"], tuple(d["points"]))
    if kind == "PointPresent":
        return PointPresent(d["name"])
    raise ValueError(f"unknown fact kind {kind!r}")


def facts_to_json(facts: Iterable[Fact]) -> list[dict[str, Any]]:
    return [f.to_dict() for f in facts]


def facts_from_json(items: Iterable[Mapping[str, Any]]) -> FactSet:
    return tuple(fact_from_dict(d) for d in items)


def sort_key(fact: Fact):
    if isinstance(fact, SegmentPresent):
        key = fact.segment
    elif isinstance(fact, SegmentLength):
        key = (canon_seg(fact.segment), fact.segment, fact.length)
    elif isinstance(fact, (SegmentEq, AngleEq, Parallel)):
        key = (fact.index, fact.members)
    elif isinstance(fact, (AngleValue, RightAngle)):
        key = (fact.angle[1], fact.angle)
    elif isinstance(fact, Collinear):
        key = fact.points
    elif isinstance(fact, OnCircle):
        key = (fact.center, fact.points)
    else:
        key = (fact.name,)
    return (KIND_ORDER[fact.kind], key)


def canonicalize(facts: Iterable[Fact]) -> FactSet:
    """Return facts in canonical form and order.

    Member lists are sorted and deduplicated and class indices are reassigned
    densely (1..k per kind) in order of each class's sorted member list.
    Classes are taken as given; merging overlapping classes is the caller's job.
    """
    classes: dict[str, list[tuple]] = {k: [] for k in CLASS_KINDS}
    others: set[Fact] = set()
    for f in facts:
        if isinstance(f, SegmentEq):
            classes[f.kind].append(tuple(sorted({canon_seg(s) for s in f.segments})))
        elif isinstance(f, AngleEq):
            classes[f.kind].append(tuple(sorted({canon_angle(a) for a in f.angles})))
        elif isinstance(f, Parallel):
            classes[f.kind].append(tuple(sorted({canon_seg(s) for s in f.lines})))
        elif isinstance(f, SegmentPresent):
            others.add(SegmentPresent(canon_seg(f.segment)))
        elif isinstance(f, AngleValue):
            others.add(AngleValue(canon_angle(f.angle), f.degrees))
        elif isinstance(f, RightAngle):
            others.add(RightAngle(canon_angle(f.angle)))
        elif isinstance(f, Collinear):
            pts = f.points if f.points[0] <= f.points[-1] else tuple(reversed(f.points))
            others.add(Collinear(pts))
        elif isinstance(f, OnCircle):
            others.add(OnCircle(f.center, tuple(sorted(set(f.points)))))
        else:
            others.add(f)
    out: list[Fact] = list(others)
    ctor = {"SegmentEq": SegmentEq, "AngleEq": AngleEq, "Parallel": Parallel}
    for kind, members in classes.items():
        for i, m in enumerate(sorted(set(members)), start=1):
            out.append(ctor[kind](i, m))
    out.sort(key=sort_key)
    return tuple(out)


def rename_facts(facts: Iterable[Fact], mapping: Mapping[str, str]) -> FactSet:
    return canonicalize(f.rename(mapping) for f in facts)


def fact_points(facts: Iterable[Fact]) -> set[str]:
    out: set[str] = set()
    for f in facts:
        out |= f.point_names()
    return out
