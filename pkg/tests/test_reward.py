import math
import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from geocaption.llm import MockClient, TransportError
from geocaption.reward import (EmptyInput, RewardBreakdown, RewardWeights, RougeVariant, bleu4, caption_reward,
                               combine, composite_reward, lcs_length, reasoning_reward, rouge_l, rouge_n,
                               solver_prompt, tokenize)
from oracles import lcs_table, naive_bleu4, naive_rouge_l

VOCAB = "a b c d e f the of ab cd is . , 1.24".split()


def random_pairs(n, seed):
    rnd = random.Random(seed)
    for _ in range(n):
        yield (" ".join(rnd.choices(VOCAB, k=rnd.randint(1, 25))),
               " ".join(rnd.choices(VOCAB, k=rnd.randint(1, 25))))


def test_oracle_equivalence():
    for cand, ref in random_pairs(50, 7):
        assert abs(bleu4(cand, ref) - naive_bleu4(cand, ref)) < 1e-9
        assert abs(rouge_l(cand, ref) - naive_rouge_l(cand, ref)) < 1e-9


def test_bit_parallel_lcs_matches_table():
    rnd = random.Random(1)
    for _ in range(500):
        a = rnd.choices("abcd", k=rnd.randint(0, 30))
        b = rnd.choices("abcde", k=rnd.randint(0, 70))
        assert lcs_length(a, b) == lcs_table(a, b)


def test_tokenize():
    assert tokenize("The length of BA is 1.24.") == ["the", "length", "of", "ba", "is", "1", ".", "24", "."]


def test_bleu_fixtures():
    assert bleu4("the cat sat on the mat", "the cat sat on the mat") == pytest.approx(1.0, abs=1e-12)
    assert bleu4("a b c d e", "v w x y z") <= 1e-8
    # every precision is 1, c=4, r=8 -> BP = exp(1 - 8/4)
    assert bleu4("a b c d", "a b c d e f g h") == pytest.approx(math.exp(-1), abs=1e-6)
    assert bleu4("ab", "ab") == pytest.approx(1.0)


@pytest.mark.xfail(strict=True, reason="exp(1 - 8/4) is exp(-1) = 0.3679, not 0.0183 = exp(-4)")
def test_bleu_stated_brevity_value():
    assert bleu4("a b c d", "a b c d e f g h") == pytest.approx(0.0183, abs=1e-4)


def test_rouge_fixtures():
    assert rouge_l("a c d", "a b c d") == pytest.approx(6 / 7, abs=1e-12)
    assert rouge_l("x y", "x y") == 1.0
    assert rouge_l("a b", "c d") == 0.0
    assert rouge_n("a b c", "a b d", 1) == pytest.approx(2 / 3)
    assert RougeVariant("rouge_2").score("a b c", "a b d") == pytest.approx(0.5)


@pytest.mark.parametrize("fn", [bleu4, rouge_l, caption_reward])
def test_empty_input(fn):
    with pytest.raises(EmptyInput):
        fn("", "a")
    with pytest.raises(EmptyInput):
        fn("a", "   ")


def test_caption_reward_mixing():
    assert caption_reward("a b c", "a b c") == pytest.approx(1.0)
    c, g = "a c d", "a b c d"
    assert caption_reward(c, g) == pytest.approx(0.7 * rouge_l(c, g) + 0.3 * bleu4(c, g))


def test_reasoning_reward():
    assert reasoning_reward(Decimal("2.48"), Decimal("2.48")) == pytest.approx(1.0)
    assert reasoning_reward(Decimal("2.50"), Decimal("2.48")) == pytest.approx(0.1)
    assert reasoning_reward(None, Decimal("2.48")) == 0.0
    assert reasoning_reward(Decimal("2.484"), "2.48") == pytest.approx(1.0)


def test_weights_validation():
    with pytest.raises(ValueError):
        RewardWeights(lambda_r=1.1)
    assert RewardWeights(rouge="rouge_1").rouge is RougeVariant.ONE
    assert RewardWeights().to_dict() == {"lambda_r": 0.7, "s_c": 0.9, "w_r": 0.7, "rouge": "rouge_l",
                                         "reveal_gold": False}


GOLD = "The figure shows points A and B. Line segment AB is present. The length of AB is 1.24."
Q = "What is twice the length of AB?"


def test_composite_total():
    solver = MockClient(["\\boxed{2.48}"])
    b = composite_reward(GOLD, GOLD, Q, Decimal("2.48"), solver)
    assert (b.reasoning, b.correct, b.formatted) == (pytest.approx(1.0), True, True)
    assert b.total == pytest.approx(1.0)
    assert solver.temperatures == [0.0]
    assert combine(1.0, 0.5, 0.7) == pytest.approx(0.85, abs=1e-12)


def test_gold_answer_hidden_unless_revealed():
    solver = MockClient(["\\boxed{1}"], cycle=True)
    composite_reward(GOLD, GOLD, Q, Decimal("2.48"), solver)
    assert "2.48" not in solver.calls[0][0] and GOLD in solver.calls[0][0]
    composite_reward(GOLD, GOLD, Q, Decimal("2.48"), solver, RewardWeights(reveal_gold=True))
    assert "2.48" in solver.calls[1][0]
    assert "{gold_hint}" not in solver_prompt(Q, GOLD)


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_lambda_edges(lam):
    w = RewardWeights(lambda_r=lam)
    b = composite_reward("Line segment AB is present.", GOLD, Q, Decimal("2.48"), MockClient(["\\boxed{3}"]), w)
    assert b.total == (b.caption if lam == 0 else b.reasoning)


def test_solver_unavailable_is_flagged():
    b = composite_reward(GOLD, GOLD, Q, Decimal("2.48"), MockClient([TransportError("down")]))
    assert b.flagged and b.reasoning == 0.0 and not b.correct
    assert b.total == pytest.approx(0.3 * b.caption)
    assert RewardBreakdown.from_dict(b.to_dict()) == b


def test_unparseable_solver_reply():
    b = composite_reward(GOLD, GOLD, Q, Decimal("2.48"), MockClient(["I think 2.48"]))
    assert (b.formatted, b.reasoning, b.flagged) == (False, 0.0, False)


def test_composite_empty_inputs():
    with pytest.raises(EmptyInput):
        composite_reward("", GOLD, Q, Decimal("1"), MockClient(["\\boxed{1}"]))
    with pytest.raises(EmptyInput):
        composite_reward(GOLD, GOLD, " ", Decimal("1"), MockClient(["\\boxed{1}"]))


# properties ------------------------------------------------------------------------------

words = st.lists(st.sampled_from(VOCAB), min_size=1, max_size=20).map(" ".join)


@settings(max_examples=300, deadline=None)
@given(words, words)
def test_metric_ranges(c, r):
    for v in (bleu4(c, r), rouge_l(c, r), caption_reward(c, r)):
        assert 0.0 <= v <= 1.0
    assert bleu4(c, c) == pytest.approx(1.0) and rouge_l(c, c) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=15),
       st.lists(st.sampled_from("abcdef"), min_size=1, max_size=15), st.permutations("abcdef"))
def test_renaming_invariance(a, b, perm):
    m = dict(zip("abcdef", perm))
    a2, b2 = [m[x] for x in a], [m[x] for x in b]
    assert bleu4(a, b) == bleu4(a2, b2)
    assert rouge_l(a, b) == rouge_l(a2, b2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.99))
def test_total_is_affine_in_lambda(reasoning, caption, lam):
    h = 0.01
    slope = (combine(reasoning, caption, lam + h) - combine(reasoning, caption, lam)) / h
    assert slope == pytest.approx(reasoning - caption, abs=1e-9)
