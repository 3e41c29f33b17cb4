"""JSONL dataset records and pipeline configuration."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import jsonschema
import yaml

from .construction import DIFFICULTIES
from .facts import FactSet, facts_from_json
from .render import StyleConfig
from .reward import RewardWeights, RougeVariant

RECORD_VERSION = 1


class SchemaViolation(ValueError):
    def __init__(self, line: int, field_name: Optional[str], message: str):
        where = f"line {line}" + (f", field {field_name!r}" if field_name else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field_name


class IoFailure(OSError):
    pass


class ConfigError(ValueError):
    pass


@lru_cache(maxsize=None)
def record_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("data/record.schema.json").read_text("utf-8"))


@lru_cache(maxsize=None)
def _validator():
    return jsonschema.Draft202012Validator(record_schema())


@dataclass
class DatasetRecord:
    id: str
    image_path: str
    caption: str
    facts: list
    difficulty: str
    seed: int
    question: str = ""
    gold_answer: Optional[str] = None
    reward_history: list = field(default_factory=list)
    version: int = RECORD_VERSION
    gold_caption: str = ""
    program: str = ""
    extra: dict = field(default_factory=dict)

    _ORDER = ("id", "image_path", "caption", "question", "gold_answer", "facts", "difficulty",
              "seed", "reward_history", "version", "gold_caption", "program")

    def fact_set(self) -> FactSet:
        return facts_from_json(self.facts)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self._ORDER}
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DatasetRecord":
        known = {f.name for f in fields(cls)} - {"extra"}
        kw = {k: v for k, v in d.items() if k in known}
        kw["extra"] = {k: v for k, v in d.items() if k not in known}
        return cls(**kw)


def validate_record(d: Mapping[str, Any], line: int = 0) -> None:
    err = jsonschema.exceptions.best_match(_validator().iter_errors(d))
    if err is None:
        return
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        name = ".".join(map(str, err.path)) + ("." if err.path else "") + missing[0]
    else:
        name = ".".join(map(str, err.path)) or None
    raise SchemaViolation(line, name, err.message)


def read_records(path) -> list[DatasetRecord]:
    out = []
    seen: dict[str, int] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(n, None, f"invalid JSON: {exc.msg}") from None
            validate_record(d, n)
            if d["id"] in seen:
                raise SchemaViolation(n, "id", f"duplicate id {d['id']!r} (first on line {seen[d['id']]})")
            seen[d["id"]] = n
            out.append(DatasetRecord.from_dict(d))
    return out


def dumps_record(rec: DatasetRecord) -> str:
    return json.dumps(rec.to_dict(), ensure_ascii=False, separators=(",", ":"))


def write_records(path, records: Iterable[DatasetRecord]) -> Path:
    path = Path(path)
    lines = []
    for n, rec in enumerate(records, start=1):
        d = rec.to_dict()
        validate_record(d, n)
        lines.append(json.dumps(d, ensure_ascii=False, separators=(",", ":")))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


# -- configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class LlmSettings:
    endpoint: Optional[str] = None
    model: str = "default"
    api_key: Optional[str] = None  # only ever taken from the API_KEY environment variable
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 8
    retry_budget: int = 5


@dataclass(frozen=True)
class RaftSettings:
    n_candidates: int = 8
    top_k: int = 1
    epochs: int = 5
    selection_policy: str = "paper_faithful"
    parallelism: int = 4
    hook: Optional[str] = None
    generator: str = "stub"  # stub | replay | remote
    candidates_file: Optional[str] = None
    generator_endpoint: Optional[str] = None


@dataclass(frozen=True)
class PipelineConfig:
    count: int = 10_000
    seed: int = 0
    difficulty_mix: Mapping[str, float] = field(
        default_factory=lambda: {"easy": 1 / 3, "medium": 1 / 3, "hard": 1 / 3})
    out_dir: str = "out"
    style: StyleConfig = StyleConfig()
    style_variation: bool = False
    shuffle_captions: bool = False
    failure_cap: float = 0.05
    workers: int = 1
    dump_scene: bool = False
    weights: RewardWeights = RewardWeights()
    raft: RaftSettings = RaftSettings()
    llm: LlmSettings = LlmSettings()

    def __post_init__(self):
        if not isinstance(self.count, int) or self.count < 1:
            raise ConfigError(f"count must be a positive integer, got {self.count!r}")
        mix = dict(self.difficulty_mix)
        bad = set(mix) - set(DIFFICULTIES)
        if bad:
            raise ConfigError(f"unknown difficulties {sorted(bad)}")
        if any(v < 0 for v in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ConfigError(f"difficulty proportions must be non-negative and sum to 1, got {mix}")
        if not 0 <= self.failure_cap <= 1:
            raise ConfigError("failure_cap must lie in [0, 1]")
        r = self.raft
        if not 1 <= r.top_k <= r.n_candidates or r.epochs < 1:
            raise ConfigError("raft needs 1 <= top_k <= n_candidates and epochs >= 1")
        if r.selection_policy not in ("paper_faithful", "monotone_guard"):
            raise ConfigError(f"unknown selection policy {r.selection_policy!r}")

    def to_dict(self) -> dict:
        return {
            "count": self.count, "seed": self.seed, "difficulty_mix": dict(self.difficulty_mix),
            "out_dir": self.out_dir, "style": self.style.to_dict(),
            "style_variation": self.style_variation, "shuffle_captions": self.shuffle_captions,
            "failure_cap": self.failure_cap, "workers": self.workers, "dump_scene": self.dump_scene,
            "weights": self.weights.to_dict(),
            "raft": {f.name: getattr(self.raft, f.name) for f in fields(RaftSettings)},
            "llm": {f.name: getattr(self.llm, f.name) for f in fields(LlmSettings) if f.name != "api_key"},
        }


def parse_mix(text: str) -> dict[str, float]:
    """``"easy:0.5,hard:0.5"`` -> ``{"easy": 0.5, "hard": 0.5}``."""
    out = {}
    try:
        for part in text.split(","):
            k, v = part.split(":")
            out[k.strip()] = float(v)
    except ValueError:
        raise ConfigError(f"bad difficulty mix {text!r}") from None
    return out


def config_from_dict(d: Mapping[str, Any], env: Optional[Mapping[str, str]] = None) -> PipelineConfig:
    env = os.environ if env is None else env
    d = dict(d)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        if "style" in d:
            d["style"] = StyleConfig.from_dict(d["style"])
        if "weights" in d:
            w = dict(d["weights"])
            if "rouge" in w:
                w["rouge"] = RougeVariant(w["rouge"])
            d["weights"] = RewardWeights(**w)
        if "raft" in d:
            d["raft"] = RaftSettings(**d["raft"])
        llm = dict(d.get("llm", {}))
        llm.pop("api_key", None)
        if env.get("ENDPOINT_URL") and not llm.get("endpoint"):
            llm["endpoint"] = env["ENDPOINT_URL"]
        if env.get("MODEL_NAME") and "model" not in llm:
            llm["model"] = env["MODEL_NAME"]
        d["llm"] = LlmSettings(api_key=env.get("API_KEY"), **llm)
        if isinstance(d.get("difficulty_mix"), str):
            d["difficulty_mix"] = parse_mix(d["difficulty_mix"])
        return PipelineConfig(**d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: Optional[Mapping[str, Any]] = None,
                env: Optional[Mapping[str, str]] = None) -> PipelineConfig:
    """Read a YAML or JSON config file; `overrides` (e.g. CLI flags) win over file values."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if isinstance(v, Mapping) and isinstance(data.get(k), Mapping):
            data[k] = {**data[k], **v}
        else:
            data[k] = v
    return config_from_dict(data, env)
