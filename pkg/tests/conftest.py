import numpy as np
import pytest

from inertialprox import backends, generate_phase_retrieval


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile (or load from disk cache) the jitted kernels once, so no
    # individual test pays the JIT cost
    backends.warm_up()


@pytest.fixture(scope="session")
def desk_instance():
    """The desk-scale benchmark instance used across tests."""
    return generate_phase_retrieval(2000, 50, seed=7)


@pytest.fixture(scope="session")
def small_instance():
    return generate_phase_retrieval(200, 20, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
