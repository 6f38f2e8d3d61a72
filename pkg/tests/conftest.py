import numpy as np
import pytest

from freshness.chains import bundled_chain, random_corpus

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def two_state():
    return bundled_chain("fig5_two_state")


@pytest.fixture(scope="session")
def small_corpus():
    return random_corpus(20, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
