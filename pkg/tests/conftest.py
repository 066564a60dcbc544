import numpy as np
import pytest

from wirs.core import Dataset, RandomSource


@pytest.fixture
def rs():
    return RandomSource(12345)


@pytest.fixture
def np_rng():
    return np.random.default_rng(2024)


def random_dataset(n, seed=0, log_u=None):
    g = np.random.default_rng(seed)
    pos = g.random((n, 3))
    if log_u is None:
        w = g.random(n) + 0.1
    else:
        w = np.exp(g.uniform(0, log_u, n))
    return Dataset(pos, w)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
