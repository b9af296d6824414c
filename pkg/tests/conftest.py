import numpy as np
import pytest

from ifsq.stats import Source, sample


@pytest.fixture(scope="session")
def normal_500k():
    return sample(Source.normal(), 500_000, 42)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
