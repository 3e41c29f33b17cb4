import json
from pathlib import Path

import jsonschema
import pytest

from geocaption.cli import main
from geocaption.dataset import (ConfigError, DatasetRecord, PipelineConfig, SchemaViolation, config_from_dict,
                                load_config, parse_mix, read_records, record_schema, write_records)
from geocaption.llm import MockClient
from geocaption.pipeline import FailureCapExceeded, cmd_generate, cmd_qa, cmd_stats, cmd_validate
from geocaption.qa import rule_based_responder


def small(tmp_path, name="out", **kw):
    return PipelineConfig(**{"count": 20, "seed": 42, "out_dir": str(tmp_path / name), **kw})


# records ----------------------------------------------------------------------------------

def test_round_trip_preserves_unknown_fields(tmp_path):
    recs = cmd_generate(small(tmp_path)).records
    recs[0].extra["annotator"] = "x"
    path = write_records(tmp_path / "d.jsonl", recs)
    back = read_records(path)
    assert back == recs and back[0].extra == {"annotator": "x"}
    assert write_records(tmp_path / "e.jsonl", back).read_bytes() == path.read_bytes()
    for line in path.read_text().splitlines():
        jsonschema.validate(json.loads(line), record_schema())


def test_missing_caption_names_line_and_field(tmp_path):
    recs = cmd_generate(small(tmp_path, count=3)).records
    lines = [r.to_dict() for r in recs]
    del lines[1]["caption"]
    p = tmp_path / "bad.jsonl"
    p.write_text("\n".join(json.dumps(d) for d in lines) + "\n")
    with pytest.raises(SchemaViolation) as e:
        read_records(p)
    assert (e.value.line, e.value.field) == (2, "caption")


def test_bad_lines(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text("{not json\n")
    with pytest.raises(SchemaViolation) as e:
        read_records(p)
    assert e.value.line == 1
    rec = cmd_generate(small(tmp_path, count=1)).records[0]
    p.write_text(f"{json.dumps(rec.to_dict())}\n\n{json.dumps(rec.to_dict())}\n")
    with pytest.raises(SchemaViolation) as e:
        read_records(p)
    assert (e.value.line, e.value.field) == (3, "id")
    with pytest.raises(SchemaViolation):
        write_records(tmp_path / "y.jsonl", [DatasetRecord(**{**rec.__dict__, "gold_answer": "1.2"})])


def test_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert read_records(p) == []


# config ---------------------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(count=0)
    with pytest.raises(ConfigError):
        PipelineConfig(difficulty_mix={"easy": 0.5, "hard": 0.4})
    with pytest.raises(ConfigError):
        config_from_dict({"colour": 1}, env={})
    with pytest.raises(ConfigError):
        parse_mix("easy=1")
    assert parse_mix("easy:0.5, hard:0.5") == {"easy": 0.5, "hard": 0.5}


def test_load_config_overrides_and_env(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("count: 5\nseed: 1\nweights: {lambda_r: 0.5}\nraft: {epochs: 2}\nllm: {api_key: leaked}\n")
    cfg = load_config(p, {"seed": 9, "count": None}, env={"API_KEY": "k", "ENDPOINT_URL": "http://e"})
    assert (cfg.count, cfg.seed, cfg.weights.lambda_r, cfg.raft.epochs) == (5, 9, 0.5, 2)
    assert (cfg.llm.api_key, cfg.llm.endpoint) == ("k", "http://e")
    assert "api_key" not in cfg.to_dict()["llm"]
    assert config_from_dict(cfg.to_dict(), env={"API_KEY": "k", "ENDPOINT_URL": "http://e"}) == cfg
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


# pipeline -------------------------------------------------------------------------------------------

def test_generate_is_byte_identical(tmp_path):
    a = cmd_generate(small(tmp_path, "a", dump_scene=True, style_variation=True, shuffle_captions=True))
    b = cmd_generate(small(tmp_path, "b", dump_scene=True, style_variation=True, shuffle_captions=True))
    files_a = sorted(p.relative_to(a.out_dir) for p in a.out_dir.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b.out_dir) for p in b.out_dir.rglob("*") if p.is_file())
    assert files_a == files_b and len(files_a) >= 41
    for rel in files_a:
        assert (a.out_dir / rel).read_bytes() == (b.out_dir / rel).read_bytes()


def test_easy_mix_has_short_programs(tmp_path):
    recs = cmd_generate(small(tmp_path, difficulty_mix={"easy": 1.0}, count=40)).records
    assert {r.difficulty for r in recs} == {"easy"}
    assert all(2 <= len(r.program.split(";")) <= 3 for r in recs)


def test_failure_cap(tmp_path, monkeypatch):
    import geocaption.pipeline as pl
    from geocaption.construction import DegenerateConstruction
    real = pl.build_sample

    def broken(config, index):
        if index % 4 == 0:
            raise DegenerateConstruction(None, "forced")
        return real(config, index)

    monkeypatch.setattr(pl, "build_sample", broken)
    res = cmd_generate(small(tmp_path, failure_cap=0.3))
    assert len(res.records) == 15 and len(res.failures) == 5
    assert (res.out_dir / "failures.jsonl").read_text().count("\n") == 5
    with pytest.raises(FailureCapExceeded):
        cmd_generate(small(tmp_path, "c", failure_cap=0.05))


def test_qa_stage(tmp_path):
    recs = cmd_generate(small(tmp_path)).records
    res = cmd_qa(recs, MockClient(rule_based_responder), transcripts_path=tmp_path / "t.jsonl")
    assert len(res.records) + len(res.dropped) == len(recs)
    assert all(r.question and r.gold_answer for r in res.records)
    assert cmd_qa(recs, MockClient(rule_based_responder)).records == res.records

    none = cmd_qa(recs, MockClient(["\\boxed{None}"], cycle=True), retry_budget=2)
    assert none.records == [] and len(none.dropped) == len(recs)

    bad = {recs[0].caption, recs[3].caption}

    def partial(prompt, temperature):
        if any(c in prompt for c in bad):
            return "\\boxed{None}"
        return rule_based_responder(prompt, temperature)

    some = cmd_qa(recs, MockClient(partial), parallelism=3)
    assert len(some.records) == len(res.records) - sum(r.id in {x.id for x in res.records}
                                                       for r in (recs[0], recs[3]))


def test_validate_and_stats(tmp_path):
    res = cmd_generate(small(tmp_path))
    path = res.out_dir / "dataset.jsonl"
    assert cmd_validate(path) == []
    stats = cmd_stats(res.records)
    assert stats["records"] == 20 and sum(stats["difficulty"].values()) == 20
    svg = res.out_dir / res.records[0].image_path
    svg.write_text(svg.read_text().replace('data-fact="', 'data-fact="X', 1))
    assert cmd_validate(path, rebuild=False)


# CLI -------------------------------------------------------------------------------------------

def test_cli_round(tmp_path, capsys):
    out = str(tmp_path / "cli")
    assert main(["generate", "--count", "15", "--seed", "3", "--out", out, "--dump-scene"]) == 0
    assert main(["qa", "--out", out, "--mock"]) == 0
    assert main(["validate", "--out", out]) == 0
    assert main(["stats", "--out", out]) == 0
    assert main(["raft", "--out", out, "--mock", "--epochs", "2"]) == 0
    assert (Path(out) / "sft_epoch_2.jsonl").is_file()
    scene = next((Path(out) / "scenes").iterdir())
    assert main(["render", str(scene), "-o", str(tmp_path / "r.svg")]) == 0
    assert main(["score", "--candidate", "Point A is present.", "--gold", "Point A is present.",
                 "--question", "What is twice the length of AB?", "--answer", "1", "--mock"]) == 0
    assert '"caption": 1.0' in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert main(["generate", "--count", "0", "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"difficulty_mix": {"easy": 2}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert main(["stats", "--dataset", str(tmp_path / "missing.jsonl")]) == 1
    out = str(tmp_path / "o")
    main(["generate", "--count", "4", "--out", out])
    assert main(["raft", "--out", out, "--mock", "--generator", "replay",
                 "--candidates-file", str(tmp_path / "none.jsonl")]) == 1
    monkeypatch.setenv("ENDPOINT_URL", "http://127.0.0.1:9/v1")
    monkeypatch.setattr("time.sleep", lambda s: None)
    assert main(["qa", "--out", out]) == 4
