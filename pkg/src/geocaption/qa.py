"""Two-stage question/answer generation from a caption."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from functools import lru_cache
from importlib import resources
from typing import Optional

from .caption import split_sentences
from .llm import LlmClient

STAGE1_TEMPERATURE = 0.2
STAGE2_TEMPERATURE = 0.8
DEFAULT_RETRY_BUDGET = 5
TWO_PLACES = Decimal("0.01")


class AnswerParseError(ValueError):
    """No usable ``\\boxed{}`` payload in a response."""


ParseFailure = AnswerParseError


class RetriesExhausted(RuntimeError):
    def __init__(self, budget: int, transcripts=()):
        super().__init__(f"no consistent question after {budget} stage-2 attempts")
        self.budget = budget
        self.transcripts = list(transcripts)


@lru_cache(maxsize=None)
def prompt_template(stage: int) -> str:
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    return resources.files(__package__).joinpath(f"data/prompt_stage{stage}.txt").read_text(encoding="utf-8")


def build_prompt(stage: int, caption: str) -> str:
    if not caption or not caption.strip():
        raise ValueError("caption must be non-empty")
    # str.replace, not str.format: the template contains literal braces
    return prompt_template(stage).replace("{description}", caption)


def _boxed_payloads(text: str) -> list[str]:
    out = []
    for m in re.finditer(r"\\boxed\s*\{", text):
        depth, i = 1, m.end()
        while i < len(text) and depth:
            depth += {"{": 1, "}": -1}.get(text[i], 0)
            i += 1
        if depth == 0:
            out.append(text[m.end():i - 1])
    return out


def quantize(value) -> Decimal:
    return Decimal(str(value)).quantize(TWO_PLACES, rounding=ROUND_HALF_UP)


def parse_final_answer(response: str) -> Optional[Decimal]:
    """Last boxed payload as a 2-dp Decimal, or None for the inconsistency sentinel."""
    payloads = _boxed_payloads(response)
    if not payloads:
        raise AnswerParseError("no \\boxed{} payload")
    raw = payloads[-1].strip()
    while raw.startswith("{") and raw.endswith("}"):
        raw = raw[1:-1].strip()
    raw = raw.strip("$ ").replace(",", "")
    if raw.lower() in ("none", "`none'", "'none'", '"none"'):
        return None
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise AnswerParseError(f"non-numeric payload {raw!r}") from None
    if not value.is_finite():
        raise AnswerParseError(f"non-finite payload {raw!r}")
    return quantize(value)


_QUESTION_RE = re.compile(r"Generated Question:\s*(.*?)\s*(?:Generated Response:|Final Answer:|\\boxed|\Z)", re.S)


def extract_question(response: str) -> str:
    """Question text from a response laid out like the prompt's answer block.

    Falls back to everything before the first ``\\boxed``.
    """
    m = _QUESTION_RE.search(response)
    if m and m.group(1).strip():
        return m.group(1).strip()
    return response.split("\\boxed", 1)[0].strip()


def leaks_caption(question: str, caption: str) -> bool:
    q = " ".join(question.split())
    return any(s in q for s in split_sentences(caption))


@dataclass
class QaPair:
    question: str
    answer: Decimal
    stage_count: int
    raw_transcripts: list = field(default_factory=list)

    @property
    def temperatures(self) -> list[float]:
        return [t for _, t, _ in self.raw_transcripts]

    def answer_text(self) -> str:
        return f"{self.answer:.2f}"


def generate_qa(caption: str, client: LlmClient, retry_budget: int = DEFAULT_RETRY_BUDGET) -> QaPair:
    """Stage 1 once at low temperature, then up to `retry_budget` stage-2 attempts.

    An attempt fails on the None sentinel, an unparseable answer, an empty
    question, or a question repeating a caption sentence verbatim.
    """
    transcripts: list[tuple[str, float, str]] = []
    attempts = [(1, STAGE1_TEMPERATURE)] + [(2, STAGE2_TEMPERATURE)] * retry_budget
    for n, (stage, temp) in enumerate(attempts, start=1):
        prompt = build_prompt(stage, caption)
        response = client.complete(prompt, temp)
        transcripts.append((prompt, temp, response))
        try:
            answer = parse_final_answer(response)
        except AnswerParseError:
            continue
        if answer is None:
            continue
        question = extract_question(response)
        if not question or leaks_caption(question, caption):
            continue
        return QaPair(question, answer, n, transcripts)
    raise RetriesExhausted(retry_budget, transcripts)


# -- offline responder -----------------------------------------------------------

_LENGTH_RE = re.compile(r"The length of ([A-Z][0-9]*[A-Z][0-9]*) is (\d+\.\d{2})\.")
_ASK_RE = re.compile(r"What is (twice|half|three times) the length of ([A-Z][0-9]*[A-Z][0-9]*)\?")
_FACTORS = {"twice": Decimal(2), "half": Decimal("0.5"), "three times": Decimal(3)}


def rule_based_responder(prompt: str, temperature: float) -> str:
    """Deterministic stand-in for a question-writing model.

    Asks about a multiple of the first labelled length in the description;
    without a labelled length it flags the sentinel. Usable with `MockClient`.
    """
    desc = prompt.split("Description:", 1)[-1].split("Generated Question:", 1)[0]
    m = _LENGTH_RE.search(desc)
    if m is None:
        return "Generated Question:\nNo measurable quantity.\nFinal Answer:\n\\boxed{None}"
    word = "twice" if temperature < 0.5 else "three times"
    value = quantize(_FACTORS[word] * Decimal(m.group(2)))
    return (f"Generated Question:\nWhat is {word} the length of {m.group(1)}?\n"
            f"Generated Response:\n{word} {m.group(2)} is {value}.\nFinal Answer:\n\\boxed{{{value}}}")


def _endpoints(seg: str) -> frozenset:
    return frozenset(re.findall(r"[A-Z][0-9]*", seg))


def rule_based_solver(prompt: str, temperature: float) -> str:
    """Answers `rule_based_responder` questions using only the caption in `prompt`."""
    ask = _ASK_RE.search(prompt)
    if ask is None:
        return "I cannot tell."
    word, seg = ask.groups()
    for m in _LENGTH_RE.finditer(prompt):
        if _endpoints(m.group(1)) == _endpoints(seg):
            return f"The answer is \\boxed{{{quantize(_FACTORS[word] * Decimal(m.group(2)))}}}"
    return "The caption does not give that length."
