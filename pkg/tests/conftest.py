import numpy as np
import pytest

from auxcpd.tensor import KruskalModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_model(rng, shape, rank, nonnegative=False):
    draw = rng.uniform if nonnegative else rng.standard_normal
    return KruskalModel([draw(size=(n, rank)) for n in shape])


# acceptance verdicts, echoed in the terminal summary so they survive output capture
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
