import numpy as np
import pytest
from hypothesis import settings

from rcmstab.chain import lnd_chain, out_of_view_chain

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def oov_chain():
    return out_of_view_chain()


@pytest.fixture(scope="session")
def full_chain():
    return lnd_chain()
