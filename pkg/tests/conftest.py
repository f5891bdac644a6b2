import numpy as np
import pytest

from edgessp import ScenarioConfig, derive_constants


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig.default()


@pytest.fixture(scope="session")
def const(cfg):
    return derive_constants(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
