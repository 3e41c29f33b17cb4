"""
Refining captions by best-of-N selection
========================================

Each epoch draws N candidate captions per record, scores them and keeps the
best. Here the candidates come from an offline generator that perturbs the
gold caption, which makes the expected outcome easy to see.
"""

# %%
# Generate a small dataset and attach questions with the offline responder.
from pathlib import Path

from geocaption.dataset import PipelineConfig
from geocaption.llm import MockClient
from geocaption.pipeline import cmd_generate, cmd_qa
from geocaption.qa import rule_based_responder, rule_based_solver

root = Path("demo_output") / "raft"
records = cmd_generate(PipelineConfig(count=12, seed=4, out_dir=str(root))).records
records = cmd_qa(records, MockClient(rule_based_responder)).records
print(records[0].question, records[0].gold_answer)

# %%
# Look at what the generator proposes for one record.
from geocaption.raft import PerturbingStubGenerator

gen = PerturbingStubGenerator(seed=1)
for text in gen.generate(records[0], 4):
    print("-", text[-90:])

# %%
# Start from degraded captions and run three epochs with the guard policy, which
# only replaces a caption when a candidate beats it.
from dataclasses import replace

from geocaption.raft import RaftConfig, run_raft

start = [replace(r, caption=PerturbingStubGenerator(seed=9, include_gold=False).generate(r, 1)[0])
         for r in records]
final, report, sft_files = run_raft(start, gen, MockClient(rule_based_solver),
                                    RaftConfig(epochs=3, selection_policy="monotone_guard"),
                                    out_dir=root / "epochs", root=root)
for e in report.epochs:
    print(f"epoch {e.epoch}: mean {e.mean:.4f} replaced {e.replacements}")

# %%
# Each epoch leaves an SFT file of image paths and captions for an external trainer.
print([p.name for p in sft_files])
print(sum(r.caption == r.gold_caption for r in final), "of", len(final), "captions restored")
