import pytest
from hypothesis import given, settings, strategies as st

from geocaption.construction import sample_program
from geocaption.dsl import (REGISTRY, ArityMismatch, Clause, DslSyntaxError, DuplicatePoint,
                            RelationDef, RelationRegistry, UnknownRelation, UseBeforeDefinition,
                            lookup_relation, parse_program, print_program, validate_clause)
from geocaption.construction import PROCEDURES


def test_registry_has_core_relations():
    assert len(REGISTRY) == 24
    for rel in REGISTRY.values():
        assert rel.arity == rel.new_point_count + rel.arg_count
        assert rel.construction_id in PROCEDURES


def test_parse_angle_mirror():
    (c,) = parse_program("angle_mirror x a b c", known_points="abc")
    assert c == Clause("angle_mirror", ("x",), ("a", "b", "c"))


def test_parse_arity_and_unknown():
    with pytest.raises(ArityMismatch) as e:
        parse_program("angle_mirror x a", known_points="a")
    assert (e.value.got, e.value.want) == (2, 4)
    with pytest.raises(UnknownRelation):
        parse_program("frobnicate x a b")


def test_parse_multi_clause_with_comments():
    text = "triangle a b c  # base\nmidpoint m a b;  foot f c a b\n\n"
    prog = parse_program(text)
    assert [c.relation for c in prog] == ["triangle", "midpoint", "foot"]
    assert prog[2].args == ("c", "a", "b")


@pytest.mark.parametrize("text, err", [
    ("triangle a b c; midpoint a b c", DuplicatePoint),
    ("midpoint m a b", UseBeforeDefinition),
    ("triangle a B c", DslSyntaxError),
    ("segment", DslSyntaxError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse_program(text)


def test_empty_program_rejected():
    with pytest.raises(ValueError):
        parse_program("   ")


def test_syntax_error_position():
    with pytest.raises(DslSyntaxError) as e:
        parse_program("segment a b; segment c D1")
    assert e.value.position == len("segment a b; segment c ")


def test_lookup_relation():
    r = lookup_relation("circumcenter")
    assert (r.new_point_count, r.arg_count) == (1, 3)
    r = lookup_relation("midpoint")
    assert (r.new_point_count, r.arg_count) == (1, 2)
    with pytest.raises(UnknownRelation):
        lookup_relation("")


def test_validate_clause_reports():
    assert validate_clause(Clause("midpoint", ("m",), ("a", "b")), {"a", "b"}).ok
    rep = validate_clause(Clause("midpoint", ("m",), ("a", "z")), {"a", "b"})
    assert [(v.kind, v.detail) for v in rep] == [("UseBeforeDefinition", "z")]
    rep = validate_clause(Clause("midpoint", ("a",), ("a", "b")), {"a", "b"})
    assert ("DuplicatePoint", "a") in [(v.kind, v.detail) for v in rep]


def test_registry_is_extensible():
    reg = RelationRegistry(REGISTRY.values())
    reg.register(RelationDef("tangent_point", 1, 2, construction_id="tangent_point"))
    assert parse_program("segment a b; tangent_point t a b", reg)[1].relation == "tangent_point"
    with pytest.raises(ValueError):
        reg.register(RelationDef("segment", 2, 0, construction_id="segment"))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["easy", "medium", "hard"]), st.integers(0, 2**32))
def test_print_parse_round_trip(difficulty, seed):
    prog = sample_program(difficulty, seed)
    assert parse_program(print_program(prog)) == prog
    assert parse_program(print_program(prog, sep="\n")) == prog
