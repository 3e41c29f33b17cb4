import json
import sys
from dataclasses import replace

import pytest

from geocaption.llm import MockClient, TransportError
from geocaption.raft import (GeneratorUnavailable, HookFailure, PerturbingStubGenerator, RaftConfig,
                             ReplayGenerator, ShortCandidateFile, emit_sft_file, refine_epoch, rollout,
                             run_raft, select_best)
from geocaption.dataset import IoFailure, read_records
from geocaption.reward import composite_reward


def test_select_best_fixtures():
    assert select_best([0.2, 0.8, 0.5], 1) == [1]
    assert select_best([0.8, 0.8], 1) == [0]
    assert select_best([0.2, 0.8, 0.5, 0.8], 4) == [1, 3, 2, 0]
    with pytest.raises(ValueError):
        select_best([0.1], 2)


def test_stub_candidates(dataset_factory):
    recs = dataset_factory(6)
    gen = PerturbingStubGenerator(seed=1)
    for rec, cands in zip(recs, rollout(recs, gen, 8)):
        assert len(cands) == 8 == len(set(cands))
        assert rec.gold_caption in cands
    assert rollout(recs, gen, 8) == rollout(recs, PerturbingStubGenerator(seed=1), 8)
    assert [len(c) for c in rollout(recs, gen, 1)] == [1] * len(recs)
    with pytest.raises(ValueError):
        rollout(recs, gen, 0)


def test_stub_reload_changes_candidates(dataset_factory):
    rec = dataset_factory(2)[0]
    gen = PerturbingStubGenerator(seed=1)
    first = gen.generate(rec, 8)
    gen.reload()
    assert gen.generate(rec, 8) != first


def test_replay_short_file(tmp_path, dataset_factory):
    rec = dataset_factory(2)[0]
    path = tmp_path / "cands.jsonl"
    path.write_text(json.dumps({"id": rec.id, "candidates": ["a", "b", "c"]}) + "\n")
    with pytest.raises(ShortCandidateFile):
        ReplayGenerator(path).generate(rec, 8)
    with pytest.raises(ShortCandidateFile):
        refine_epoch([rec], ReplayGenerator(tmp_path / "missing.jsonl"), MockClient(["x"]))
    assert issubclass(ShortCandidateFile, GeneratorUnavailable)


def test_gold_candidate_wins(dataset_factory, solver):
    recs = dataset_factory(10)
    out, stats, outcomes = refine_epoch(recs, PerturbingStubGenerator(seed=3), solver, RaftConfig(parallelism=2))
    assert stats.selection_ok and stats.replacements == len(recs) and stats.failures == 0
    for rec, o in zip(out, outcomes):
        assert rec.caption == rec.gold_caption
        assert o.scores[o.chosen[0]].total == pytest.approx(1.0)
        assert rec.reward_history[-1]["epoch"] == 1


def test_records_change_only_caption_and_rewards(dataset_factory, solver):
    recs = dataset_factory(5)
    gen = PerturbingStubGenerator(seed=3, include_gold=False)
    out, _, _ = refine_epoch(recs, gen, solver, RaftConfig(parallelism=1))
    for a, b in zip(recs, out):
        assert replace(b, caption=a.caption, reward_history=a.reward_history) == a


def test_monotone_guard_rejects_worse(dataset_factory, solver):
    recs = dataset_factory(8)
    cfg = RaftConfig(selection_policy="monotone_guard")
    out, stats, _ = refine_epoch(recs, PerturbingStubGenerator(include_gold=False), solver, cfg)
    assert stats.replacements == 0
    assert [r.caption for r in out] == [r.caption for r in recs]


def test_monotone_guard_is_non_decreasing(dataset_factory, solver):
    recs = dataset_factory(8)
    gen = PerturbingStubGenerator(seed=5, include_gold=False)
    worst = [replace(r, caption=gen.generate(r, 1)[0]) for r in recs]
    gen.reload()
    _, report, _ = run_raft(worst, gen, solver, RaftConfig(epochs=4, selection_policy="monotone_guard"))
    for traj in report.trajectories.values():
        assert all(b >= a for a, b in zip(traj, traj[1:]))
    means = [e.mean for e in report.epochs]
    assert means == sorted(means)


def test_frozen_replay_is_idempotent(tmp_path, dataset_factory, solver):
    recs = dataset_factory(6)
    stub = PerturbingStubGenerator(seed=9, include_gold=False)
    path = tmp_path / "cands.jsonl"
    path.write_text("".join(json.dumps({"id": r.id, "candidates": stub.generate(r, 8)}) + "\n" for r in recs))
    out, _, _ = run_raft(recs, ReplayGenerator(path), solver, RaftConfig(epochs=3))
    for r in out:
        chosen = [h["chosen"] for h in r.reward_history]
        assert chosen[1:] == chosen[:1] * 2


def test_failures_are_isolated(dataset_factory):
    recs = dataset_factory(4)

    def flaky(prompt, temperature):
        if recs[1].gold_caption in prompt:
            raise RuntimeError("solver crashed")
        return "\\boxed{0}"

    out, stats, outcomes = refine_epoch(recs, PerturbingStubGenerator(), MockClient(flaky), RaftConfig())
    assert stats.failures == 1 and stats.replacements == 3
    assert outcomes[1].failed.startswith("RuntimeError") and out[1] is recs[1]
    assert all(len(r.reward_history) == 1 for i, r in enumerate(out) if i != 1)


def test_transport_errors_are_flagged_not_fatal(dataset_factory):
    recs = dataset_factory(3)
    out, stats, outcomes = refine_epoch(recs, PerturbingStubGenerator(), MockClient([TransportError("down")],
                                                                                    cycle=True), RaftConfig())
    assert stats.failures == 0
    assert all(r.reward_history[-1]["solver_flagged"] for r in out)


def test_empty_dataset_rejected(solver):
    with pytest.raises(ValueError):
        refine_epoch([], PerturbingStubGenerator(), solver)


def test_config_validation():
    with pytest.raises(ValueError):
        RaftConfig(top_k=9)
    with pytest.raises(ValueError):
        RaftConfig(epochs=0)
    with pytest.raises(ValueError):
        RaftConfig(selection_policy="greedy")


def test_five_epochs_write_artifacts(dataset_factory, solver, tmp_path):
    recs = dataset_factory(5)
    out_dir = tmp_path / "raft"
    final, report, sft = run_raft(recs, PerturbingStubGenerator(), solver, RaftConfig(epochs=5),
                                  out_dir=out_dir, root=dataset_factory.root)
    assert len(report.epochs) == 5 == len(sft)
    assert all(p.is_file() for p in sft)
    assert json.loads((out_dir / "raft_report.json").read_text())["epochs"][4]["epoch"] == 5
    assert read_records(out_dir / "dataset_epoch_5.jsonl") == final
    assert all(len(r.reward_history) == 5 for r in final)


def test_hook_failure_keeps_artifacts(dataset_factory, solver, tmp_path):
    recs = dataset_factory(3)
    out_dir = tmp_path / "raft"
    hook = f"{sys.executable} -c \"import sys; sys.exit(int(sys.argv[1]) >= 2)\" {{epoch}} {{sft_file}}"
    with pytest.raises(HookFailure) as e:
        run_raft(recs, PerturbingStubGenerator(), solver, RaftConfig(epochs=5, hook=hook),
                 out_dir=out_dir, root=dataset_factory.root)
    assert e.value.epoch == 2
    assert sorted(p.name for p in out_dir.glob("sft_epoch_*.jsonl")) == ["sft_epoch_1.jsonl", "sft_epoch_2.jsonl"]
    with pytest.raises(ValueError):
        run_raft(recs, PerturbingStubGenerator(), solver, RaftConfig(hook="true"))


def test_emit_sft_file(dataset_factory, tmp_path):
    recs = dataset_factory(12)[:10]
    root = dataset_factory.root
    path = emit_sft_file(list(reversed(recs)), tmp_path / "sft.jsonl", root)
    lines = path.read_text().splitlines()
    assert len(lines) == 10
    assert [json.loads(l)["image_path"] for l in lines] == sorted(r.image_path for r in recs)
    first = path.read_bytes()
    assert emit_sft_file(recs, tmp_path / "sft.jsonl", root).read_bytes() == first
    (root / recs[3].image_path).unlink()
    with pytest.raises(IoFailure, match=recs[3].id):
        emit_sft_file(recs, tmp_path / "sft2.jsonl", root)


def test_score_matches_history(dataset_factory, solver):
    rec = dataset_factory(2)[0]
    out, _, outcomes = refine_epoch([rec], PerturbingStubGenerator(), solver)
    o = outcomes[0]
    again = composite_reward(o.candidates[o.chosen[0]], rec.gold_caption, rec.question, rec.gold_answer, solver)
    assert out[0].reward_history[-1]["total"] == again.total
