"""Clause language for geometric constructions.

A program is a sequence of clauses such as ``triangle a b c; midpoint m a b``.
Each clause names a relation, the points it introduces, and the existing
points it depends on::

    program := clause ((";" | NEWLINE) clause)*
    clause  := IDENT IDENT+
    comment := "#" .* EOL
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

NAME_RE = re.compile(r"[a-z][a-z0-9]*\Z")
_TOKEN_RE = re.compile(r"\S+")


class DslError(ValueError):
    """Base class for clause-language errors."""


class UnknownRelation(DslError):
    def __init__(self, name: str):
        super().__init__(f"unknown relation {name!r}")
        self.name = name


class ArityMismatch(DslError):
    def __init__(self, relation: str, got: int, want: int):
        super().__init__(f"{relation} takes {want} point names, got {got}")
        self.relation = relation
        self.got = got
        self.want = want


class DuplicatePoint(DslError):
    def __init__(self, name: str):
        super().__init__(f"point {name!r} is introduced twice")
        self.name = name


class UseBeforeDefinition(DslError):
    def __init__(self, name: str):
        super().__init__(f"point {name!r} is used before it is defined")
        self.name = name


class DslSyntaxError(DslError):
    def __init__(self, position: int, message: str):
        super().__init__(f"syntax error at offset {position}: {message}")
        self.position = position


@dataclass(frozen=True)
class RelationDef:
    name: str
    new_point_count: int
    arg_count: int
    construction_id: str
    fact_templates: tuple[str, ...] = ()
    description: str = ""
    dependency_kinds: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.new_point_count < 1 or self.arg_count < 0:
            raise ValueError(f"bad arity for relation {self.name!r}")
        if not self.dependency_kinds:
            object.__setattr__(self, "dependency_kinds", ("point",) * self.arg_count)
        if len(self.dependency_kinds) != self.arg_count:
            raise ValueError(f"dependency kinds of {self.name!r} do not match arg_count")

    @property
    def arity(self) -> int:
        """Number of point tokens a clause of this relation carries."""
        return self.new_point_count + self.arg_count


class RelationRegistry(Mapping[str, RelationDef]):
    """Name -> RelationDef table. New relations are added with `register`."""

    def __init__(self, relations: Iterable[RelationDef] = ()):
        self._relations: dict[str, RelationDef] = {}
        for rel in relations:
            self.register(rel)

    def register(self, rel: RelationDef) -> RelationDef:
        if rel.name in self._relations:
            raise ValueError(f"relation {rel.name!r} already registered")
        self._relations[rel.name] = rel
        return rel

    def lookup(self, name: str) -> RelationDef:
        try:
            return self._relations[name]
        except KeyError:
            raise UnknownRelation(name) from None

    def __getitem__(self, name: str) -> RelationDef:
        return self._relations[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._relations)

    def __len__(self) -> int:
        return len(self._relations)


def _rel(name, new, args, facts, description):
    return RelationDef(name, new, args, construction_id=name, fact_templates=facts,
                       description=description)


CORE_RELATIONS = (
    _rel("free", 1, 0, ("PointPresent",), "an unconstrained point"),
    _rel("segment", 2, 0, ("SegmentPresent",), "a segment between two fresh points"),
    _rel("triangle", 3, 0, ("SegmentPresent", "AngleValue", "RightAngle"), "a triangle"),
    _rel("iso_triangle", 3, 0, ("SegmentEq", "AngleEq", "AngleValue"),
         "isosceles triangle with apex at the first point"),
    _rel("equilateral", 3, 0, ("SegmentEq", "AngleValue"), "equilateral triangle"),
    _rel("square", 4, 0, ("SegmentEq", "RightAngle"), "square a b c d"),
    _rel("parallelogram", 4, 0, ("Parallel", "AngleValue"), "parallelogram a b c d"),
    _rel("trapezoid", 4, 0, ("Parallel", "AngleValue"), "trapezoid with ab parallel to dc"),
    _rel("midpoint", 1, 2, ("SegmentEq",), "midpoint of ab"),
    _rel("circumcenter", 1, 3, ("SegmentEq",), "circumcenter of abc"),
    _rel("incenter", 1, 3, ("AngleEq",), "incenter of abc"),
    _rel("centroid", 1, 3, ("SegmentPresent",), "centroid of abc"),
    _rel("orthocenter", 1, 3, ("SegmentPresent",), "orthocenter of abc"),
    _rel("foot", 1, 3, ("RightAngle", "Collinear"), "foot of the perpendicular from c to ab"),
    _rel("parallel_through", 1, 3, ("Parallel",), "x on the line through a parallel to bc"),
    _rel("perp_through", 1, 2, ("RightAngle",), "x on the line through a perpendicular to ab"),
    _rel("angle_bisector", 1, 3, ("AngleEq",), "x on the bisector of angle abc"),
    _rel("angle_mirror", 1, 3, ("AngleEq",), "x mirrors c across line ab, so ab bisects xbc"),
    _rel("reflect_line", 1, 3, ("SegmentEq",), "x is the reflection of c across line ab"),
    _rel("reflect_point", 1, 2, ("SegmentEq", "Collinear"), "x is the reflection of c through m"),
    _rel("on_circle", 1, 2, ("OnCircle",), "x on the circle centred at o through a"),
    _rel("intersect_ll", 1, 4, ("Collinear",), "x is the intersection of lines ab and cd"),
    _rel("intersect_lc", 1, 4, ("Collinear", "OnCircle"),
         "x is an intersection of line ab with the circle centred at o through c"),
    _rel("eqdistance", 1, 3, ("SegmentEq",), "x with ax equal to bc"),
)

REGISTRY = RelationRegistry(CORE_RELATIONS)


def lookup_relation(name: str, registry: RelationRegistry = REGISTRY) -> RelationDef:
    return registry.lookup(name)


@dataclass(frozen=True)
class Clause:
    relation: str
    new_points: tuple[str, ...]
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return " ".join((self.relation,) + self.new_points + self.args)

    @property
    def names(self) -> tuple[str, ...]:
        return self.new_points + self.args


ClauseList = tuple[Clause, ...]


@dataclass(frozen=True)
class Violation:
    kind: str  # UnknownRelation, ArityMismatch, DuplicatePoint, UseBeforeDefinition, InvalidName
    detail: str

    def to_error(self) -> DslError:
        if self.kind == "UnknownRelation":
            return UnknownRelation(self.detail)
        if self.kind == "DuplicatePoint":
            return DuplicatePoint(self.detail)
        if self.kind == "UseBeforeDefinition":
            return UseBeforeDefinition(self.detail)
        return DslError(f"{self.kind}: {self.detail}")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_clause(clause: Clause, known_points: Iterable[str],
                    registry: RelationRegistry = REGISTRY) -> ValidationReport:
    """Check arity, freshness and dependencies of one clause.

    Numeric non-degeneracy is not checked here; see `construction.construct_scene`.
    """
    known = set(known_points)
    out: list[Violation] = []
    rel = registry.get(clause.relation)
    if rel is None:
        return ValidationReport((Violation("UnknownRelation", clause.relation),))
    if len(clause.new_points) != rel.new_point_count or len(clause.args) != rel.arg_count:
        got = len(clause.new_points) + len(clause.args)
        out.append(Violation("ArityMismatch", f"{rel.name}:{got}:{rel.arity}"))
    for name in clause.names:
        if not NAME_RE.match(name):
            out.append(Violation("InvalidName", name))
    seen: set[str] = set()
    for name in clause.new_points:
        if name in known or name in seen or name in clause.args:
            out.append(Violation("DuplicatePoint", name))
        seen.add(name)
    for name in clause.args:
        if name not in known:
            out.append(Violation("UseBeforeDefinition", name))
    return ValidationReport(tuple(out))


def _split_clauses(text: str) -> Iterator[tuple[int, str]]:
    """Yield (offset, clause_text) pairs, comments stripped."""
    offset = 0
    for line in text.splitlines(keepends=True):
        body = line.split("#", 1)[0]
        pos = 0
        for chunk in body.split(";"):
            if chunk.strip():
                yield offset + pos, chunk
            pos += len(chunk) + 1
        offset += len(line)


def parse_program(text: str, registry: RelationRegistry = REGISTRY,
                  known_points: Iterable[str] = ()) -> ClauseList:
    """Parse program text into clauses, checking every clause as it is read.

    `known_points` seeds the set of already-defined names, which lets a single
    clause be parsed against an existing scene.
    """
    if not text or not text.strip():
        raise ValueError("empty program")
    known = set(known_points)
    clauses = []
    for offset, chunk in _split_clauses(text):
        tokens = [(offset + m.start(), m.group()) for m in _TOKEN_RE.finditer(chunk)]
        rel_pos, rel_name = tokens[0]
        if not re.match(r"[A-Za-z_][A-Za-z0-9_]*\Z", rel_name):
            raise DslSyntaxError(rel_pos, f"bad relation name {rel_name!r}")
        if len(tokens) < 2:
            raise DslSyntaxError(rel_pos + len(rel_name), "clause has no point names")
        for pos, tok in tokens[1:]:
            if not NAME_RE.match(tok):
                raise DslSyntaxError(pos, f"bad point name {tok!r}")
        rel = registry.lookup(rel_name)
        names = tuple(tok for _, tok in tokens[1:])
        if len(names) != rel.arity:
            raise ArityMismatch(rel.name, len(names), rel.arity)
        clause = Clause(rel.name, names[:rel.new_point_count], names[rel.new_point_count:])
        report = validate_clause(clause, known, registry)
        if report:
            raise report.violations[0].to_error()
        known.update(clause.new_points)
        clauses.append(clause)
    if not clauses:
        raise ValueError("program contains no clauses")
    return tuple(clauses)


def print_program(clauses: Iterable[Clause], sep: str = "; ") -> str:
    return sep.join(str(c) for c in clauses)


def defined_points(clauses: Iterable[Clause]) -> list[str]:
    out: list[str] = []
    for c in clauses:
        out.extend(c.new_points)
    return out
