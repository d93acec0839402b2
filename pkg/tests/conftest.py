import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from amppr.model import SignalModel, gen_instance  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_instance():
    return gen_instance(SignalModel(), 200, 4.0, 0.0, seed=11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
