import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from morpholattice.testing import example_two, example_two_lexicon

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def sent2():
    return example_two()


@pytest.fixture
def lex2():
    return example_two_lexicon()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
