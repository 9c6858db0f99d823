import numpy as np
import pytest

from pointer_entropy.dynamics import propagate
from pointer_entropy.model import (ContinuousBath, OhmicExponential, QuadraticModel,
                                   discretize_bath, wavepacket_superposition)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ak_closed():
    """Arthurs-Kelly, kappa = 1, no bath, grid step 0.1 up to t = 2."""
    return propagate(QuadraticModel.arthurs_kelly(1.0), grid=np.linspace(0, 2, 21))


@pytest.fixture(scope="session")
def ohmic_spec():
    return ContinuousBath(OhmicExponential(0.05, 5.0), beta=1.0, n_modes=32)


@pytest.fixture(scope="session")
def ak_ohmic(ohmic_spec):
    model = QuadraticModel.arthurs_kelly(1.0, ohmic_spec)
    return propagate(model, discretize_bath(ohmic_spec), np.linspace(0, 1, 101))


def two_peak_state(points=4096, separation=3.0, width=0.5):
    """Even superposition of two packets at +-separation/2 (a 'cat' state)."""
    half = 0.5 * separation
    x = np.linspace(-half - 12 * width, half + 12 * width, points)
    p = np.linspace(-12 / (2 * width), 12 / (2 * width), points)
    return wavepacket_superposition([1, 1], [-half, half], [0, 0], [width, width], x, p)
