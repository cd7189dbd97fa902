import numpy as np
import pytest

from wavecarleman.domain import make_grid
from wavecarleman.weights import build_weights


@pytest.fixture(scope="session")
def grid():
    return make_grid((0.0, 1.0), X=4.0, T=1.0, n_xprime=33, n_axial=129, n_time=65, symmetric_time=True)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid((0.0, 1.0), X=2.0, T=1.0, n_xprime=17, n_axial=33, n_time=33, symmetric_time=True)


@pytest.fixture(scope="session")
def weights():
    return build_weights(-0.5, 2.0, 0.1, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
