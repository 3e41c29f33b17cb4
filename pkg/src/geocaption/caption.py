"""Template captions for fact sets, and the parser that inverts them.

Templates live in ``data/caption_templates.json``. Each template is also
compiled into a regular expression, so `parse_caption` accepts exactly the
sentences `fact_to_sentence` can produce.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .facts import (AngleEq, AngleValue, Collinear, Fact, FactSet, OnCircle, Parallel,
                    PointPresent, RightAngle, SegmentEq, SegmentLength, SegmentPresent,
                    fact_points, sort_key)

_CAPTION_NAME = re.compile(r"[a-z][0-9]*\Z")
_SENTENCE_SPLIT = re.compile(r"(?<=\.)\s+")

_NAME = r"[A-Z][0-9]*"
_SEG = rf"{_NAME}{_NAME}"
_ANGLE = rf"{_NAME}{_NAME}{_NAME}"


def _list_of(item: str) -> str:
    return rf"{item}(?:(?:, {item})* and {item})?"


_SLOTS = {
    "seg": _SEG, "segs": _list_of(_SEG), "angle": _ANGLE, "angles": _list_of(_ANGLE),
    "points": _list_of(_NAME), "name": _NAME, "center": _NAME,
    "length": r"\d+\.\d{2}", "degrees": r"\d+", "count": r"\w+ \w+",
}


class UnrecognizedSentence(ValueError):
    def __init__(self, index: int, sentence: str):
        super().__init__(f"sentence {index} does not match any template: {sentence!r}")
        self.index = index
        self.sentence = sentence


@dataclass(frozen=True)
class CaptionText:
    sentences: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.sentences)

    def __str__(self) -> str:
        return self.text

    def __len__(self) -> int:
        return len(self.sentences)


@lru_cache(maxsize=None)
def load_templates() -> dict:
    with resources.files(__package__).joinpath("data/caption_templates.json").open(encoding="utf-8") as fh:
        return json.load(fh)


def _compile(template: str) -> re.Pattern:
    parts = re.split(r"(\{\w+\})", template)
    out = []
    for part in parts:
        m = re.fullmatch(r"\{(\w+)\}", part)
        out.append(f"(?P<{m.group(1)}>{_SLOTS[m.group(1)]})" if m else re.escape(part))
    return re.compile("".join(out) + r"\Z")


@lru_cache(maxsize=None)
def _patterns() -> tuple[tuple[str, re.Pattern], ...]:
    t = load_templates()
    pats = [(kind, _compile(entry["template"])) for kind, entry in t["facts"].items()]
    pats += [("preamble", _compile(v)) for v in t["preamble"].values()]
    return tuple(pats)


# -- formatting ---------------------------------------------------------------

def _up(name: str) -> str:
    if not _CAPTION_NAME.match(name):
        raise ValueError(f"point name {name!r} cannot be captioned (letter plus optional digits)")
    return name.upper()


def _word(names: Iterable[str]) -> str:
    return "".join(_up(n) for n in names)


def _join(items: Sequence[str]) -> str:
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def count_phrase(k: int, unit: Sequence[str]) -> str:
    numbers = load_templates()["numbers"]
    word = numbers[k] if k < len(numbers) else str(k)
    return f"{word} {unit[0] if k == 1 else unit[1]}"


def fact_to_sentence(fact: Fact) -> str:
    entry = load_templates()["facts"][fact.kind]
    t = entry["template"]
    if isinstance(fact, SegmentPresent):
        return t.format(seg=_word(fact.segment))
    if isinstance(fact, SegmentLength):
        return t.format(seg=_word(fact.segment), length=f"{fact.length:.2f}")
    if isinstance(fact, (SegmentEq, Parallel)):
        return t.format(segs=_join([_word(s) for s in fact.members]),
                        count=count_phrase(fact.index, entry["unit"]))
    if isinstance(fact, AngleEq):
        return t.format(angles=_join([_word(a) for a in fact.angles]),
                        count=count_phrase(fact.index, entry["unit"]))
    if isinstance(fact, AngleValue):
        return t.format(angle=_word(fact.angle), degrees=fact.degrees)
    if isinstance(fact, RightAngle):
        return t.format(angle=_word(fact.angle))
    if isinstance(fact, Collinear):
        return t.format(points=_join([_up(p) for p in fact.points]))
    if isinstance(fact, OnCircle):
        return t.format(center=_up(fact.center), points=_join([_up(p) for p in fact.points]))
    if isinstance(fact, PointPresent):
        return t.format(name=_up(fact.name))
    raise TypeError(f"not a fact: {fact!r}")


def preamble(points: Iterable[str]) -> str:
    names = sorted(points)
    t = load_templates()["preamble"]
    if not names:
        return t["none"]
    key = "one" if len(names) == 1 else "many"
    return t[key].format(points=_join([_up(n) for n in names]))


def caption_facts(facts: FactSet, shuffle_seed: Optional[int] = None) -> CaptionText:
    """Preamble listing the points, then one sentence per fact.

    With `shuffle_seed` the fact sentences are permuted; the preamble stays first.
    """
    body = [fact_to_sentence(f) for f in facts]
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(body))
        body = [body[i] for i in order]
    return CaptionText((preamble(fact_points(facts)),) + tuple(body))


# -- parsing ------------------------------------------------------------------

_NAME_RE = re.compile(_NAME)


def _names(word: str) -> tuple[str, ...]:
    return tuple(n.lower() for n in _NAME_RE.findall(word))


def _items(text: str) -> list[str]:
    head, _, last = text.rpartition(" and ")
    return (head.split(", ") + [last]) if head else [last]


def _count(phrase: str, unit: Sequence[str]) -> Optional[int]:
    word, noun = phrase.split(" ")
    numbers = load_templates()["numbers"]
    k = numbers.index(word) if word in numbers else (int(word) if word.isdigit() else None)
    if k is None or k < 1 or noun != (unit[0] if k == 1 else unit[1]):
        return None
    return k


def _build(kind: str, m: re.Match) -> Optional[Fact]:
    d = m.groupdict()
    unit = load_templates()["facts"][kind].get("unit")
    if kind == "SegmentPresent":
        return SegmentPresent(_names(d["seg"]))
    if kind == "SegmentLength":
        return SegmentLength(_names(d["seg"]), round(float(d["length"]), 2))
    if kind in ("SegmentEq", "Parallel"):
        k = _count(d["count"], unit)
        members = tuple(_names(s) for s in _items(d["segs"]))
        return None if k is None else (SegmentEq if kind == "SegmentEq" else Parallel)(k, members)
    if kind == "AngleEq":
        k = _count(d["count"], unit)
        return None if k is None else AngleEq(k, tuple(_names(a) for a in _items(d["angles"])))
    if kind == "AngleValue":
        return AngleValue(_names(d["angle"]), int(d["degrees"]))
    if kind == "RightAngle":
        return RightAngle(_names(d["angle"]))
    if kind == "Collinear":
        return Collinear(tuple(n.lower() for n in _items(d["points"])))
    if kind == "OnCircle":
        return OnCircle(d["center"].lower(), tuple(n.lower() for n in _items(d["points"])))
    if kind == "PointPresent":
        return PointPresent(d["name"].lower())
    return None


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


def parse_sentence(sentence: str) -> Optional[Fact]:
    """Fact realized by `sentence`; None for the preamble. Raises ValueError if off-template."""
    for kind, pat in _patterns():
        m = pat.match(sentence)
        if m is None:
            continue
        if kind == "preamble":
            return None
        fact = _build(kind, m)
        if fact is not None:
            return fact
    raise ValueError(sentence)


def parse_caption(text: "CaptionText | str") -> FactSet:
    """Recover the fact set from a templated caption. Sentence order is irrelevant."""
    sentences = list(text.sentences) if isinstance(text, CaptionText) else split_sentences(text)
    out: list[Fact] = []
    for i, s in enumerate(sentences):
        try:
            fact = parse_sentence(s)
        except ValueError:
            raise UnrecognizedSentence(i, s) from None
        if fact is not None:
            out.append(fact)
    return tuple(sorted(set(out), key=sort_key))
