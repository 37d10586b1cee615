import numpy as np
import pytest

from driftlab.env import EnvironmentSpec
from driftlab.kernels import KernelParams
from driftlab.statics import calibrate


@pytest.fixture(scope="session")
def spec():
    return EnvironmentSpec(dimension=2, range=32.0, seed=7)


@pytest.fixture(scope="session")
def kernel(spec):
    return KernelParams.for_spec(spec)


@pytest.fixture(scope="session")
def unit_spec():
    """The small-scale configuration (R = 1)."""
    return EnvironmentSpec(dimension=2, range=1.0, seed=7)


@pytest.fixture(scope="session")
def calib(spec):
    return calibrate(spec, 0.1, 50_000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
