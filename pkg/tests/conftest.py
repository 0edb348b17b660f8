import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running simulation tests (FDTCLOSURE_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("FDTCLOSURE_SLOW", "") in ("1", "true", "yes"):
        return
    skip = pytest.mark.skip(reason="slow; set FDTCLOSURE_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
