import numpy as np
import pytest

from armafield.composite import SEPARABLE_AR, SEPARABLE_ARMA, WHITE
from armafield.synthesis import SynthesisConfig, synthesize

ACCEPTANCE_LINES = []


def synth(texture, size, seed, burn_in=64):
    order, params = texture
    n1, n2 = (size, size) if np.isscalar(size) else size
    return synthesize(SynthesisConfig(order, params, n1, n2, burn_in, seed))


@pytest.fixture
def ar_texture():
    return SEPARABLE_AR


@pytest.fixture
def arma_texture():
    return SEPARABLE_ARMA


@pytest.fixture
def white_texture():
    return WHITE


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
