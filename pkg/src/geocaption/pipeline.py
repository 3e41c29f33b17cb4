"""End-to-end stages: generate, qa, raft, validate, stats.

Output layout of a generated dataset::

    out_dir/
      dataset.jsonl
      images/<id>.svg
      scenes/<id>.json      (only with dump_scene)
      failures.jsonl        (records that could not be built)
"""
from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .caption import caption_facts, parse_caption
from .construction import DIFFICULTIES, ConstructionError, Scene, derive_seed, extract_facts, generate_scene
from .dataset import DatasetRecord, PipelineConfig, read_records, write_records
from .facts import facts_to_json
from .llm import HttpClient, LlmClient, MockClient
from .qa import RetriesExhausted, generate_qa, rule_based_responder, rule_based_solver
from .raft import (PerturbingStubGenerator, RaftConfig, RemoteGenerator, ReplayGenerator, run_raft)
from .render import facts_from_svg, render_svg, sample_style

log = logging.getLogger(__name__)

DATASET_FILE = "dataset.jsonl"


class FailureCapExceeded(RuntimeError):
    def __init__(self, failures: int, total: int, cap: float):
        super().__init__(f"{failures} of {total} records failed, above the {cap:.0%} cap")
        self.failures = failures
        self.total = total


def record_id(index: int) -> str:
    return f"geo-{index:06d}"


def choose_difficulty(mix, seed: int, index: int) -> str:
    names = [d for d in DIFFICULTIES if mix.get(d, 0) > 0]
    probs = np.array([mix[d] for d in names], dtype=float)
    rng = np.random.default_rng(derive_seed(seed, index, 2))
    return names[int(rng.choice(len(names), p=probs / probs.sum()))]


@dataclass
class Sample:
    record: DatasetRecord
    svg: str
    scene: Scene


def build_sample(config: PipelineConfig, index: int) -> Sample:
    """Scene, facts, diagram and caption for record `index`; a pure function of the config."""
    seed = derive_seed(config.seed, index)
    difficulty = choose_difficulty(config.difficulty_mix, config.seed, index)
    scene = generate_scene(difficulty, seed)
    facts = extract_facts(scene)
    style = config.style
    if config.style_variation:
        style = sample_style(np.random.default_rng(derive_seed(config.seed, index, 3)), style)
    svg = render_svg(scene, facts, style)
    shuffle = derive_seed(config.seed, index, 4) if config.shuffle_captions else None
    caption = caption_facts(facts, shuffle).text
    rid = record_id(index)
    from .dsl import print_program
    rec = DatasetRecord(id=rid, image_path=f"images/{rid}.svg", caption=caption,
                        facts=facts_to_json(facts), difficulty=difficulty, seed=seed,
                        gold_caption=caption, program=print_program(scene.history))
    return Sample(rec, svg.text, scene)


@dataclass
class GenerateResult:
    records: list
    failures: list = field(default_factory=list)
    out_dir: Optional[Path] = None


def cmd_generate(config: PipelineConfig, out_dir=None) -> GenerateResult:
    out = Path(out_dir or config.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    if config.dump_scene:
        (out / "scenes").mkdir(exist_ok=True)
    records, failures = [], []

    def work(i):
        try:
            return build_sample(config, i)
        except ConstructionError as exc:
            return exc

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = pool.map(work, range(config.count))
    else:
        results = map(work, range(config.count))
    for i, res in enumerate(results):
        if isinstance(res, Exception):
            failures.append({"id": record_id(i), "error": f"{type(res).__name__}: {res}"})
            log.warning("record %s skipped: %s", record_id(i), res)
            if len(failures) > config.failure_cap * config.count:
                raise FailureCapExceeded(len(failures), config.count, config.failure_cap)
            continue
        (out / res.record.image_path).write_text(res.svg, encoding="utf-8")
        if config.dump_scene:
            (out / "scenes" / f"{res.record.id}.json").write_text(json.dumps(res.scene.to_dict()), encoding="utf-8")
        records.append(res.record)
    write_records(out / DATASET_FILE, records)
    if failures:
        (out / "failures.jsonl").write_text("".join(json.dumps(f) + "\n" for f in failures), encoding="utf-8")
    return GenerateResult(records, failures, out)


def make_client(config: PipelineConfig, mock: bool = False, solver: bool = False) -> LlmClient:
    if mock or not config.llm.endpoint:
        return MockClient(rule_based_solver if solver else rule_based_responder)
    s = config.llm
    return HttpClient(s.endpoint, s.model, s.api_key, timeout=s.timeout, max_retries=s.max_retries,
                      max_in_flight=s.max_in_flight)


@dataclass
class QaResult:
    records: list
    dropped: list = field(default_factory=list)


def cmd_qa(records: Sequence[DatasetRecord], client: LlmClient, retry_budget: int = 5,
           parallelism: int = 1, transcripts_path=None) -> QaResult:
    """Attach a question and gold answer to each record; drop records whose QA loop gives up.

    Transport errors propagate.
    """
    def work(rec):
        try:
            return generate_qa(rec.caption, client, retry_budget)
        except RetriesExhausted as exc:
            return exc

    if parallelism > 1:
        with ThreadPoolExecutor(parallelism) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]
    kept, dropped, log_lines = [], [], []
    for rec, res in zip(records, results):
        turns = res.transcripts if isinstance(res, RetriesExhausted) else res.raw_transcripts
        log_lines += [json.dumps({"id": rec.id, "temperature": t, "prompt": p, "response": r}) for p, t, r in turns]
        if isinstance(res, RetriesExhausted):
            dropped.append({"id": rec.id, "error": str(res)})
            log.warning("record %s dropped: %s", rec.id, res)
            continue
        kept.append(replace(rec, question=res.question, gold_answer=res.answer_text()))
    if transcripts_path is not None:
        Path(transcripts_path).write_text("".join(l + "\n" for l in log_lines), encoding="utf-8")
    return QaResult(kept, dropped)


def make_generator(config: PipelineConfig, root):
    r = config.raft
    if r.generator == "stub":
        return PerturbingStubGenerator(seed=config.seed)
    if r.generator == "replay":
        if not r.candidates_file:
            raise ValueError("replay generator needs raft.candidates_file")
        return ReplayGenerator(r.candidates_file)
    if r.generator == "remote":
        if not r.generator_endpoint:
            raise ValueError("remote generator needs raft.generator_endpoint")
        return RemoteGenerator(r.generator_endpoint, root)
    raise ValueError(f"unknown generator {r.generator!r}")


def raft_config(config: PipelineConfig) -> RaftConfig:
    r = config.raft
    return RaftConfig(n_candidates=r.n_candidates, top_k=r.top_k, epochs=r.epochs,
                      selection_policy=r.selection_policy, weights=config.weights,
                      parallelism=r.parallelism, hook=r.hook)


def cmd_raft(records, config: PipelineConfig, solver: LlmClient, root, out_dir=None, generator=None):
    root = Path(root)
    gen = generator or make_generator(config, root)
    return run_raft(records, gen, solver, raft_config(config), out_dir=out_dir or root, root=root)


def check_alignment(rec: DatasetRecord, svg: str, scene: Optional[Scene] = None) -> list[str]:
    """Mismatches between the caption, the diagram and the stored (or re-extracted) facts."""
    stored = rec.fact_set()
    problems = []
    for what, decode, src in (("caption", parse_caption, rec.gold_caption or rec.caption),
                              ("diagram", facts_from_svg, svg)):
        try:
            if decode(src) != stored:
                problems.append(f"{rec.id}: {what} facts differ from stored facts")
        except (ValueError, ET.ParseError) as exc:
            problems.append(f"{rec.id}: cannot decode {what}: {exc}")
    if scene is not None and extract_facts(scene) != stored:
        problems.append(f"{rec.id}: re-extracted facts differ from stored facts")
    return problems


def cmd_validate(dataset_path, rebuild: bool = True) -> list[str]:
    path = Path(dataset_path)
    root = path.parent
    problems = []
    for rec in read_records(path):
        img = root / rec.image_path
        if not img.is_file():
            problems.append(f"{rec.id}: missing image {rec.image_path}")
            continue
        scene = generate_scene(rec.difficulty, rec.seed) if rebuild else None
        problems += check_alignment(rec, img.read_text(encoding="utf-8"), scene)
    return problems


def cmd_stats(records: Sequence[DatasetRecord]) -> dict:
    kinds = Counter(f["kind"] for r in records for f in r.facts)
    return {
        "records": len(records),
        "difficulty": dict(sorted(Counter(r.difficulty for r in records).items())),
        "fact_kinds": dict(sorted(kinds.items())),
        "with_question": sum(bool(r.question) for r in records),
        "mean_facts": float(np.mean([len(r.facts) for r in records])) if records else 0.0,
    }

