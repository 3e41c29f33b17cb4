import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geocaption.construction import (DIFFICULTY_CLAUSES, EPS_DIST, DegenerateConstruction, NumericFailure,
                                     Scene, apply_relation, construct_scene, extract_facts,
                                     generate_scene, residual, sample_program)
from geocaption.dsl import Clause, validate_clause
from geocaption.facts import (AngleEq, AngleValue, Collinear, OnCircle, Parallel, PointPresent, RightAngle,
                              SegmentEq, SegmentLength, rename_facts)
from oracles import angle_deg, circumcenter_lstsq

RIGHT = {"a": (0.0, 0.0), "b": (4.0, 0.0), "c": (0.0, 3.0)}


def test_circumcenter_of_right_triangle():
    s = construct_scene("triangle a b c; circumcenter o a b c", 0, fixed=RIGHT)
    assert s.points["o"] == pytest.approx((2.0, 1.5), abs=1e-12)


def test_circumcenter_matches_linear_solve():
    fixed = {"a": (0.3, -0.2), "b": (2.1, 0.4), "c": (0.8, 2.6)}
    s = construct_scene("triangle a b c; circumcenter o a b c", 0, fixed=fixed)
    assert s.points["o"] == pytest.approx(circumcenter_lstsq(*fixed.values()), abs=1e-12)


def test_midpoint_fixture():
    s = construct_scene("segment a b; midpoint m a b", 0, fixed={"a": (0, 0), "b": (2, 0)})
    assert s.points["m"] == (1.0, 0.0)


def test_collinear_circumcenter_rejected():
    with pytest.raises(DegenerateConstruction):
        construct_scene("triangle a b c; circumcenter o a b c", 0,
                        fixed={"a": (0, 0), "b": (1, 0), "c": (2, 0)})


def test_zero_length_segment_rejected():
    with pytest.raises(DegenerateConstruction):
        construct_scene("segment a b", 0, fixed={"a": (0, 0), "b": (0, 0)})
    with pytest.raises(DegenerateConstruction):
        construct_scene("segment a b", 0, fixed={"a": (0, 0), "b": (EPS_DIST / 2, 0)})


def test_sub_threshold_angle_rejected():
    tip = (math.cos(math.radians(5)), math.sin(math.radians(5)))
    with pytest.raises(DegenerateConstruction):
        construct_scene("triangle a b c", 0, fixed={"a": (0, 0), "b": (1, 0), "c": tip})


def test_line_circle_miss_is_numeric_failure():
    scene = construct_scene("segment a b; segment o c", 0,
                            fixed={"a": (0, 3), "b": (1, 3), "o": (0, 0), "c": (1, 0)})
    with pytest.raises(NumericFailure):
        apply_relation(scene, Clause("intersect_lc", ("x",), ("a", "b", "o", "c")), np.random.default_rng(0))


@pytest.mark.parametrize("program, fixed, name, want", [
    ("segment a b; free c; angle_mirror x a b c", {"a": (0, 0), "b": (1, 0), "c": (1, 1)}, "x", (1, -1)),
    ("segment c m; reflect_point x c m", {"c": (2, 2), "m": (0, 0)}, "x", (-2, -2)),
    ("segment a b; free c; foot f c a b", {"a": (0, 0), "b": (4, 0), "c": (1, 5)}, "f", (1, 0)),
])
def test_apply_relation_fixtures(program, fixed, name, want):
    s = construct_scene(program, 0, fixed=fixed)
    assert s.points[name] == pytest.approx(want, abs=1e-12)


def test_apply_relation_keeps_existing_points():
    s = construct_scene("triangle a b c", 3)
    t = apply_relation(s, Clause("incenter", ("i",), ("a", "b", "c")), np.random.default_rng(0))
    assert {k: t.points[k] for k in s.points} == s.points
    assert set(t.points) - set(s.points) == {"i"}


def test_construct_is_deterministic():
    prog = "triangle a b c; angle_bisector d a b c; intersect_ll e b d a c; on_circle f e a"
    assert construct_scene(prog, 11) == construct_scene(prog, 11)
    assert construct_scene(prog, 11).points != construct_scene(prog, 12).points


@pytest.mark.parametrize("difficulty", ["easy", "medium", "hard"])
def test_sample_program_structure(difficulty):
    lo, hi = DIFFICULTY_CLAUSES[difficulty]
    for seed in range(30):
        prog = sample_program(difficulty, seed)
        assert lo <= len(prog) <= hi
        known = set()
        for c in prog:
            assert validate_clause(c, known).ok
            known.update(c.new_points)
        assert sample_program(difficulty, seed) == prog
        if difficulty == "easy":
            assert len(known) <= 5


def test_equilateral_facts():
    facts = extract_facts(construct_scene("equilateral a b c", 5))
    assert SegmentEq(1, (("a", "b"), ("a", "c"), ("b", "c"))) in facts
    for angle in (("a", "b", "c"), ("b", "a", "c"), ("a", "c", "b")):
        assert AngleValue(angle, 60) in facts


def test_perp_through_gives_right_angle_only():
    for seed in range(20):
        facts = extract_facts(construct_scene("segment a b; perp_through x a b", seed))
        assert RightAngle(("b", "a", "x")) in facts
        assert not any(isinstance(f, AngleValue) and f.degrees == 90 for f in facts)


def test_non_grid_angle_has_no_value():
    fixed = {"a": (0, 0), "b": (1, 0),
             "c": (2 * math.cos(math.radians(50)), 2 * math.sin(math.radians(50)))}
    facts = extract_facts(construct_scene("triangle a b c", 0, fixed=fixed))
    assert not any(isinstance(f, AngleValue) and f.angle[1] == "a" for f in facts)


def test_circumcenter_fixture_facts():
    facts = extract_facts(construct_scene("triangle a b c; circumcenter o a b c", 0, fixed=RIGHT))
    assert SegmentEq(1, (("a", "o"), ("b", "o"), ("c", "o"))) in facts
    assert RightAngle(("b", "a", "c")) in facts


def test_foot_facts():
    facts = extract_facts(construct_scene("segment a b; free c; foot f c a b", 0,
                                          fixed={"a": (0, 0), "b": (4, 0), "c": (1, 5)}))
    assert Collinear(("a", "f", "b")) in facts
    assert RightAngle(("a", "f", "c")) in facts


def test_class_indices_dense():
    for seed in range(40):
        facts = extract_facts(generate_scene("hard", seed))
        for kind in (SegmentEq, AngleEq, Parallel):
            idx = [f.index for f in facts if isinstance(f, kind)]
            assert idx == list(range(1, len(idx) + 1))


def test_point_present_only_for_unmentioned():
    facts = extract_facts(construct_scene("segment a b; free c", 1))
    assert PointPresent("c") in facts
    assert PointPresent("a") not in facts


def test_length_labels_scaled():
    s = construct_scene("triangle a b c", 9)
    labels = [f for f in extract_facts(s) if isinstance(f, SegmentLength)]
    assert 1 <= len(labels) <= 2
    for f in labels:
        p, q = (s.points[n] for n in f.segment)
        assert f.length == round(math.dist(p, q) * s.length_scale, 2)


# residual fixtures --------------------------------------------------------------

def _scene(**pts):
    return Scene(points={k: tuple(map(float, v)) for k, v in pts.items()})


def test_residual_fixtures():
    s = _scene(a=(0, 0), b=(1, 0), c=(0, 0.0), d=(0, 1))
    assert residual(s, SegmentEq(1, (("a", "b"), ("c", "d")))) == 0.0
    s = _scene(a=(0, 0), b=(1, 0), c=(2, 0.3))
    assert residual(s, Collinear(("a", "b", "c"))) == pytest.approx(0.3)
    t = math.radians(89)
    s = _scene(a=(1, 0), b=(0, 0), c=(math.cos(t), math.sin(t)))
    assert residual(s, RightAngle(("a", "b", "c"))) == pytest.approx(0.0174524, abs=1e-6)


def test_residual_on_circle_and_parallel():
    s = _scene(o=(0, 0), a=(1, 0), b=(0, 1.2), c=(0, 0.5), d=(1, 0.5))
    assert residual(s, OnCircle("o", ("a", "b"))) == pytest.approx(0.2)
    assert residual(s, Parallel(1, (("o", "a"), ("c", "d")))) == 0.0


# properties -----------------------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["easy", "medium", "hard"]), st.integers(0, 2**40))
def test_soundness_and_scene_invariants(difficulty, seed):
    s = generate_scene(difficulty, seed)
    pts = list(s.points.values())
    assert all(math.isfinite(x) for p in pts for x in p)
    assert min(math.dist(p, q) for i, p in enumerate(pts) for q in pts[i + 1:]) >= EPS_DIST
    for f in extract_facts(s):
        assert residual(s, f) < 1e-6, f
        if isinstance(f, AngleValue):
            assert abs(angle_deg(*(s.points[n] for n in f.angle)) - f.degrees) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.randoms(use_true_random=False))
def test_facts_invariant_under_renaming(seed, rnd):
    s = generate_scene("medium", seed)
    names = list(s.points)
    fresh = [f"p{i}" for i in range(len(names))]
    rnd.shuffle(fresh)
    mapping = dict(zip(names, fresh))
    renamed = Scene.from_dict({**s.to_dict(),
                               "history": "; ".join(
                                   " ".join([c.relation] + [mapping[n] for n in c.names]) for c in s.history),
                               "points": {mapping[k]: list(v) for k, v in s.points.items()},
                               "length_labels": [[mapping[n] for n in seg] for seg in s.length_labels]})
    assert extract_facts(renamed) == rename_facts(extract_facts(s), mapping)


def test_scene_dump_round_trip():
    s = generate_scene("hard", 4)
    t = Scene.from_dict(s.to_dict())
    assert t.points == s.points and t.history == s.history
    assert extract_facts(t) == extract_facts(s)
