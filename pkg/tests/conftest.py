"""Shared fixtures: a trained model on a small synthetic corpus."""

import pytest

from tskin import model, synth

# Populated by test_acceptance; echoed after the run so the per-criterion
# verdict lines are visible even with output capturing enabled.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("train-corpus")
    synth.generate_corpus(d, 24, seed=42)
    return d


@pytest.fixture(scope="session")
def trained_model(corpus_dir):
    return model.train_model(corpus_dir)
