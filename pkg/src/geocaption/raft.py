"""Reward-ranked caption refinement over a dataset.

Each epoch asks a caption generator for N candidates per record, scores them
with `composite_reward`, keeps the best, writes the refined dataset plus an
SFT file, and optionally runs an external trainer command on that file.
"""
from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, Union, runtime_checkable

import httpx
import numpy as np

from .construction import derive_seed
from .dataset import DatasetRecord, IoFailure, write_records
from .llm import LlmClient
from .reward import RewardBreakdown, RewardWeights, composite_reward

log = logging.getLogger(__name__)

POLICIES = ("paper_faithful", "monotone_guard")
HIST_BINS = 10


class GeneratorUnavailable(RuntimeError):
    pass


class ShortCandidateFile(GeneratorUnavailable):
    def __init__(self, record_id: str, have: int, want: int):
        super().__init__(f"record {record_id!r}: {have} candidates on file, {want} requested")
        self.record_id = record_id


class HookFailure(RuntimeError):
    def __init__(self, epoch: int, returncode: int, command: str):
        super().__init__(f"trainer hook exited with {returncode} after epoch {epoch}: {command}")
        self.epoch = epoch
        self.returncode = returncode


@runtime_checkable
class CaptionGenerator(Protocol):
    def generate(self, record: DatasetRecord, n: int) -> list[str]: ...


# -- generators ------------------------------------------------------------------------

_NUM_WORDS = ("one", "two", "three", "four", "five", "six")
_SWAPS = (("equal", "unequal"), ("parallel", "perpendicular"), ("collinear", "concyclic"),
          ("present", "missing"), ("right angle", "straight angle"), ("circle", "ellipse"))


def _mutate(sentences: list[str], rng: np.random.Generator) -> list[str]:
    out = list(sentences)
    body = range(1, len(out)) if len(out) > 1 else range(len(out))
    i = int(rng.choice(list(body)))
    s = out[i]
    op = int(rng.integers(5))
    if op == 0 and len(out) > 2:
        del out[i]
        return out
    if op == 1 and re.search(r"\d+\.\d\d", s):
        m = re.search(r"\d+\.\d\d", s)
        delta = float(rng.choice([-1, 1])) * float(rng.integers(1, 300)) / 100
        new = f"{max(0.01, float(m.group()) + delta):.2f}"
        out[i] = s[:m.start()] + new + s[m.end():]
        return out
    if op == 2:
        letters = sorted(set(re.findall(r"\b[A-Z]\b|(?<=[A-Z])[A-Z]|[A-Z](?=[A-Z])", s)))
        if len(letters) >= 2:
            a, b = rng.choice(letters, size=2, replace=False)
            out[i] = s.translate(str.maketrans({a: b, b: a}))
            return out
    if op == 3:
        for k, w in enumerate(_NUM_WORDS):
            if f" {w} " in s:
                repl = _NUM_WORDS[(k + 1) % len(_NUM_WORDS)]
                out[i] = s.replace(f" {w} ", f" {repl} ", 1)
                return out
    for a, b in _SWAPS:
        if a in s:
            out[i] = s.replace(a, b, 1)
            return out
    out.insert(i + 1, s)  # fallback: repeat a sentence
    return out


class PerturbingStubGenerator:
    """Offline generator: the gold caption plus N-1 distinct mutations of it.

    The gold caption's slot is chosen by the seeded rng. `reload` moves to a
    fresh round of mutations, standing in for a retrained model.
    """

    def __init__(self, seed: int = 0, include_gold: bool = True, max_mutations: int = 3):
        self.seed = seed
        self.include_gold = include_gold
        self.max_mutations = max_mutations
        self.round = 0

    def reload(self) -> None:
        self.round += 1

    def generate(self, record: DatasetRecord, n: int) -> list[str]:
        from .caption import split_sentences

        gold = record.gold_caption or record.caption
        sentences = split_sentences(gold)
        key = zlib.crc32(record.id.encode("utf-8"))
        rng = np.random.default_rng(derive_seed(self.seed, key, self.round))
        want = n - 1 if self.include_gold else n
        seen = {gold}
        out: list[str] = []
        tries = 0
        while len(out) < want:
            tries += 1
            cur = sentences
            for _ in range(int(rng.integers(1, self.max_mutations + 1))):
                cur = _mutate(cur, rng)
            text = " ".join(cur)
            if tries > 50 * n:
                text = f"{gold} Variant {len(out) + 1}."
            if text not in seen:
                seen.add(text)
                out.append(text)
        if self.include_gold:
            out.insert(int(rng.integers(n)), gold)
        return out


class ReplayGenerator:
    """Candidates read from a JSONL file of ``{"id": ..., "candidates": [...]}`` lines."""

    def __init__(self, path):
        self.path = Path(path)
        self._table: dict[str, list[str]] = {}
        self.reload()

    def reload(self) -> None:
        table = {}
        try:
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        d = json.loads(line)
                        table[d["id"]] = list(d["candidates"])
        except FileNotFoundError:
            table = {}
        self._table = table

    def generate(self, record: DatasetRecord, n: int) -> list[str]:
        have = self._table.get(record.id, [])
        if len(have) < n:
            raise ShortCandidateFile(record.id, len(have), n)
        return have[:n]


class RemoteGenerator:
    """POSTs ``{"image_path", "n"}`` to an inference endpoint returning ``{"candidates": [...]}``."""

    def __init__(self, endpoint: str, root: Union[str, Path] = ".", timeout: float = 120.0,
                 transport: Optional[httpx.BaseTransport] = None):
        self.endpoint = endpoint
        self.root = Path(root)
        self._http = httpx.Client(timeout=timeout, transport=transport)

    def reload(self) -> None:
        try:
            self._http.post(self.endpoint.rstrip("/") + "/reload")
        except httpx.HTTPError as exc:
            log.warning("generator reload failed: %s", exc)

    def generate(self, record: DatasetRecord, n: int) -> list[str]:
        try:
            resp = self._http.post(self.endpoint, json={"image_path": str(self.root / record.image_path), "n": n})
            resp.raise_for_status()
            cands = list(resp.json()["candidates"])
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise GeneratorUnavailable(f"remote generator failed for {record.id}: {exc}") from exc
        if len(cands) != n:
            raise GeneratorUnavailable(f"remote generator returned {len(cands)} candidates, wanted {n}")
        return cands


# -- selection -------------------------------------------------------------------------

def _total(s) -> float:
    return s.total if isinstance(s, RewardBreakdown) else float(s)


def select_best(scores: Sequence, k: int = 1) -> list[int]:
    """Indices of the k highest totals, best first; ties go to the lower index."""
    if not 1 <= k <= len(scores):
        raise ValueError(f"k={k} with {len(scores)} candidates")
    return sorted(range(len(scores)), key=lambda i: (-_total(scores[i]), i))[:k]


def rollout(records: Sequence[DatasetRecord], generator: CaptionGenerator, n: int) -> list[list[str]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for rec in records:
        cands = list(generator.generate(rec, n))
        if len(cands) != n:
            raise GeneratorUnavailable(f"generator returned {len(cands)} candidates for {rec.id}, wanted {n}")
        out.append(cands)
    return out


@dataclass(frozen=True)
class RaftConfig:
    n_candidates: int = 8
    top_k: int = 1
    epochs: int = 5
    selection_policy: str = "paper_faithful"
    weights: RewardWeights = RewardWeights()
    parallelism: int = 4
    hook: Optional[str] = None  # command template with {sft_file} and {epoch}

    def __post_init__(self):
        if not 1 <= self.top_k <= self.n_candidates:
            raise ValueError("need 1 <= top_k <= n_candidates")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.selection_policy not in POLICIES:
            raise ValueError(f"selection_policy must be one of {POLICIES}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass
class RecordOutcome:
    record: DatasetRecord
    replaced: bool = False
    failed: Optional[str] = None
    candidates: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    chosen: list = field(default_factory=list)
    incumbent: Optional[RewardBreakdown] = None

    @property
    def kept_total(self) -> Optional[float]:
        if self.failed or not self.record.reward_history:
            return None
        return self.record.reward_history[-1]["total"]


@dataclass
class EpochStats:
    epoch: int
    mean: float
    max: float
    min: float
    replacements: int
    failures: int
    histogram: list
    selection_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RaftReport:
    epochs: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"epochs": [e.to_dict() for e in self.epochs], "trajectories": self.trajectories}


def _score(rec: DatasetRecord, text: str, solver: LlmClient, weights: RewardWeights) -> RewardBreakdown:
    return composite_reward(text, rec.gold_caption or rec.caption, rec.question or "?",
                            rec.gold_answer, solver, weights)


def _refine_one(rec: DatasetRecord, generator: CaptionGenerator, solver: LlmClient,
                config: RaftConfig, epoch: int) -> RecordOutcome:
    try:
        cands = list(generator.generate(rec, config.n_candidates))
        if len(cands) != config.n_candidates:
            raise GeneratorUnavailable(f"{len(cands)} candidates for {rec.id}, wanted {config.n_candidates}")
        scores = [_score(rec, c, solver, config.weights) for c in cands]
        chosen = select_best(scores, config.top_k)
        best = scores[chosen[0]]
        incumbent = None
        if config.selection_policy == "monotone_guard":
            incumbent = _score(rec, rec.caption, solver, config.weights)
            replace_it = best.total > incumbent.total
        else:
            replace_it = True
    except ShortCandidateFile:
        raise
    except Exception as exc:  # isolate per-record failures
        log.warning("record %s failed in epoch %d: %s", rec.id, epoch, exc)
        return RecordOutcome(rec, failed=f"{type(exc).__name__}: {exc}")
    kept = best if replace_it else incumbent
    entry = {"epoch": epoch, "total": kept.total, "reasoning": kept.reasoning, "caption": kept.caption,
             "replaced": replace_it, "chosen": chosen, "candidate_totals": [s.total for s in scores],
             "solver_flagged": any(s.flagged for s in scores)}
    new = replace(rec, caption=cands[chosen[0]] if replace_it else rec.caption,
                  reward_history=list(rec.reward_history) + [entry])
    return RecordOutcome(new, replace_it, None, cands, scores, chosen, incumbent)


def refine_epoch(records: Sequence[DatasetRecord], generator: CaptionGenerator, solver: LlmClient,
                 config: RaftConfig = RaftConfig(), epoch: int = 1):
    """One rollout/score/select pass. Returns (new records, EpochStats, outcomes)."""
    if not records:
        raise ValueError("dataset is empty")
    if config.parallelism == 1:
        outcomes = [_refine_one(r, generator, solver, config, epoch) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(lambda r: _refine_one(r, generator, solver, config, epoch), records))
    kept = [o.kept_total for o in outcomes if o.kept_total is not None]
    ok = all(o.failed or abs(o.scores[o.chosen[0]].total - max(s.total for s in o.scores)) == 0
             for o in outcomes)
    hist = np.histogram(kept, bins=HIST_BINS, range=(0.0, 1.0))[0].tolist() if kept else [0] * HIST_BINS
    stats = EpochStats(
        epoch=epoch,
        mean=float(np.mean(kept)) if kept else 0.0,
        max=float(np.max(kept)) if kept else 0.0,
        min=float(np.min(kept)) if kept else 0.0,
        replacements=sum(o.replaced for o in outcomes),
        failures=sum(o.failed is not None for o in outcomes),
        histogram=hist,
        selection_ok=ok,
    )
    return [o.record for o in outcomes], stats, outcomes


def emit_sft_file(records: Sequence[DatasetRecord], path, root=None) -> Path:
    """Write ``{"image_path", "caption"}`` lines sorted by record id."""
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    lines = []
    for rec in sorted(records, key=lambda r: r.id):
        if not (root / rec.image_path).is_file():
            raise IoFailure(f"record {rec.id}: image {rec.image_path} not found under {root}")
        lines.append(json.dumps({"image_path": rec.image_path, "caption": rec.caption}, ensure_ascii=False))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def run_hook(template: str, sft_file: Path, epoch: int) -> None:
    cmd = template.format(sft_file=shlex.quote(str(sft_file)), epoch=epoch)
    proc = subprocess.run(cmd, shell=True)
    if proc.returncode != 0:
        raise HookFailure(epoch, proc.returncode, cmd)


def run_raft(records: Sequence[DatasetRecord], generator: CaptionGenerator, solver: LlmClient,
             config: RaftConfig = RaftConfig(), out_dir=None, root=None,
             on_epoch: Optional[Callable[[EpochStats], None]] = None):
    """Run `config.epochs` refinement epochs. Returns (records, RaftReport, SFT file paths).

    With `out_dir` set, each epoch writes ``dataset_epoch_{t}.jsonl``,
    ``sft_epoch_{t}.jsonl`` and an updated ``raft_report.json`` before the
    trainer hook runs, so a failing hook leaves every finished epoch on disk.
    """
    if config.hook and out_dir is None:
        raise ValueError("a trainer hook needs out_dir for its SFT files")
    records = list(records)
    report = RaftReport(trajectories={r.id: [] for r in records})
    sft_files: list[Path] = []
    out = Path(out_dir) if out_dir is not None else None
    for t in range(1, config.epochs + 1):
        records, stats, outcomes = refine_epoch(records, generator, solver, config, epoch=t)
        report.epochs.append(stats)
        for o in outcomes:
            report.trajectories[o.record.id].append(o.kept_total)
        if on_epoch:
            on_epoch(stats)
        if out is not None:
            write_records(out / f"dataset_epoch_{t}.jsonl", records)
            sft = emit_sft_file(records, out / f"sft_epoch_{t}.jsonl", root)
            sft_files.append(sft)
            (out / "raft_report.json").write_text(json.dumps(report.to_dict(), indent=1), encoding="utf-8")
            if config.hook:
                run_hook(config.hook, sft, t)
        if hasattr(generator, "reload"):
            generator.reload()
    return records, report, sft_files
