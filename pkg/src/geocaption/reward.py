"""Caption metrics and the composite caption reward.

Both metrics work on the same tokenization: lowercase, then runs of word
characters and single punctuation marks.

>>> round(rouge_l("a c d", "a b c d"), 4)
0.8571
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from decimal import Decimal
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence, Union

from .llm import LlmClient, TransportError
from .qa import AnswerParseError, parse_final_answer, quantize

BLEU_EPS = 1e-9
ANSWER_TOL = Decimal("0.005")

Tokens = Union[str, Sequence[str]]

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EmptyInput(ValueError):
    pass


SolverUnavailable = TransportError


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _tokens(x: Tokens, side: str) -> list[str]:
    toks = tokenize(x) if isinstance(x, str) else list(x)
    if not toks:
        raise EmptyInput(f"{side} has no tokens")
    return toks


def _ngrams(toks: Sequence[str], n: int) -> Counter:
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu4(candidate: Tokens, reference: Tokens, eps: float = BLEU_EPS) -> float:
    """Sentence BLEU-4 with uniform weights and an eps floor on clipped matches.

    Orders longer than the candidate are left out and the remaining weights
    renormalized, so a 2-token sentence still scores 1 against itself.
    """
    c = _tokens(candidate, "candidate")
    r = _tokens(reference, "reference")
    orders = range(1, min(4, len(c)) + 1)
    log_p = 0.0
    for n in orders:
        cand, ref = _ngrams(c, n), _ngrams(r, n)
        matches = sum(min(k, ref[g]) for g, k in cand.items())
        log_p += math.log(max(matches, eps) / (len(c) - n + 1)) / len(orders)
    bp = 1.0 if len(c) >= len(r) else math.exp(1.0 - len(r) / len(c))
    return min(1.0, bp * math.exp(log_p))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # bit-parallel LCS: one big-int row update per token of `a`
    m = len(b)
    masks: dict[str, int] = {}
    for i, y in enumerate(b):
        masks[y] = masks.get(y, 0) | (1 << i)
    full = (1 << m) - 1
    v = full
    for x in a:
        u = v & masks.get(x, 0)
        v = ((v + u) | (v - u)) & full
    return m - bin(v).count("1")


def _f1(overlap: float, n_cand: int, n_ref: int) -> float:
    if overlap == 0:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


def rouge_l(candidate: Tokens, reference: Tokens) -> float:
    c = _tokens(candidate, "candidate")
    r = _tokens(reference, "reference")
    return _f1(lcs_length(c, r), len(c), len(r))


def rouge_n(candidate: Tokens, reference: Tokens, n: int = 1) -> float:
    c = _tokens(candidate, "candidate")
    r = _tokens(reference, "reference")
    cand, ref = _ngrams(c, n), _ngrams(r, n)
    overlap = sum((cand & ref).values())
    return _f1(overlap, max(sum(cand.values()), 1), max(sum(ref.values()), 1))


class RougeVariant(str, Enum):
    L = "rouge_l"
    ONE = "rouge_1"
    TWO = "rouge_2"

    def score(self, candidate: Tokens, reference: Tokens) -> float:
        if self is RougeVariant.L:
            return rouge_l(candidate, reference)
        return rouge_n(candidate, reference, 1 if self is RougeVariant.ONE else 2)


@dataclass(frozen=True)
class RewardWeights:
    lambda_r: float = 0.7
    s_c: float = 0.9
    w_r: float = 0.7
    rouge: RougeVariant = RougeVariant.L
    reveal_gold: bool = False  # show the gold answer to the solver

    def __post_init__(self):
        for name in ("lambda_r", "s_c", "w_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        object.__setattr__(self, "rouge", RougeVariant(self.rouge))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rouge"] = self.rouge.value
        return d


def caption_reward(candidate: Tokens, gold: Tokens, w_r: float = 0.7,
                   variant: RougeVariant = RougeVariant.L) -> float:
    return w_r * RougeVariant(variant).score(candidate, gold) + (1.0 - w_r) * bleu4(candidate, gold)


def answers_match(answer: Optional[Decimal], gold) -> bool:
    if answer is None or gold is None:
        return False
    a, g = Decimal(str(answer)), Decimal(str(gold))
    return quantize(a) == quantize(g) or abs(a - g) <= ANSWER_TOL


def reasoning_reward(solver_answer: Optional[Decimal], gold, s_c: float = 0.9) -> float:
    """`solver_answer` is the parsed boxed number, or None when the reply had none."""
    formatted = solver_answer is not None
    correct = answers_match(solver_answer, gold)
    return s_c * float(correct) + (1.0 - s_c) * float(formatted)


def combine(reasoning: float, caption: float, lambda_r: float) -> float:
    return lambda_r * reasoning + (1.0 - lambda_r) * caption


@dataclass(frozen=True)
class RewardBreakdown:
    reasoning: float
    caption: float
    total: float
    rouge: float
    bleu: float
    correct: bool
    formatted: bool
    solver_answer: Optional[str] = None
    solver_error: Optional[str] = None

    @property
    def flagged(self) -> bool:
        return self.solver_error is not None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RewardBreakdown":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


@lru_cache(maxsize=None)
def _solver_template() -> str:
    return resources.files(__package__).joinpath("data/solver_prompt.txt").read_text(encoding="utf-8")


def solver_prompt(question: str, caption: str, gold_answer=None) -> str:
    hint = "" if gold_answer is None else f"(Reference answer: {quantize(gold_answer)})\n"
    return (_solver_template().replace("{caption}", caption).replace("{question}", question)
            .replace("{gold_hint}\n", hint))


def composite_reward(candidate: str, gold_caption: str, question: str, gold_answer,
                     solver: LlmClient, weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    """Score one candidate caption against its record.

    The solver is asked once. If it cannot be reached the reasoning part is 0
    and the breakdown carries the error.
    """
    for name, text in (("candidate", candidate), ("gold_caption", gold_caption), ("question", question)):
        if not text or not text.strip():
            raise EmptyInput(f"{name} is empty")
    rouge = weights.rouge.score(candidate, gold_caption)
    bleu = bleu4(candidate, gold_caption)
    cap = weights.w_r * rouge + (1.0 - weights.w_r) * bleu

    prompt = solver_prompt(question, candidate, gold_answer if weights.reveal_gold else None)
    answer, error = None, None
    try:
        answer = parse_final_answer(solver.complete(prompt, 0.0))
    except AnswerParseError:
        pass
    except TransportError as exc:
        error = str(exc) or type(exc).__name__
    correct = answers_match(answer, gold_answer)
    reasoning = 0.0 if error else reasoning_reward(answer, gold_answer, weights.s_c)
    return RewardBreakdown(
        reasoning=reasoning, caption=cap, total=combine(reasoning, cap, weights.lambda_r),
        rouge=rouge, bleu=bleu, correct=correct and not error, formatted=answer is not None,
        solver_answer=None if answer is None else f"{answer:.2f}", solver_error=error)
