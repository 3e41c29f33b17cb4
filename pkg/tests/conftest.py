import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geocaption.dataset import PipelineConfig  # noqa: E402
from geocaption.llm import MockClient  # noqa: E402
from geocaption.pipeline import cmd_generate, cmd_qa  # noqa: E402
from geocaption.qa import rule_based_responder, rule_based_solver  # noqa: E402


def build_dataset(root, count, seed=0, **kw):
    """Generated records with rule-based questions attached; records without a labelled length drop out."""
    cfg = PipelineConfig(count=count, seed=seed, out_dir=str(root), **kw)
    gen = cmd_generate(cfg)
    return cmd_qa(gen.records, MockClient(rule_based_responder)).records


@pytest.fixture
def dataset_factory(tmp_path):
    def make(count=12, seed=0, **kw):
        return build_dataset(tmp_path, count, seed, **kw)
    make.root = tmp_path
    return make


@pytest.fixture
def solver():
    return MockClient(rule_based_solver)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
