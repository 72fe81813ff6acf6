import sys

import numpy as np
import pytest

from dsuta import presets
from dsuta.harness import source_model
from dsuta.stream import TaskSpec, build_stream, stream_spec_from_config


@pytest.fixture(scope="session")
def hard_stream():
    return build_stream(stream_spec_from_config(presets.md_hard(20), seed=0))


@pytest.fixture(scope="session")
def phi_pre():
    return source_model(TaskSpec(frame_noise=presets.FRAME_NOISE))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
