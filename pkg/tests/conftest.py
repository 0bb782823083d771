import numpy as np
import pytest

from eitmem.memory_sim import DecoherenceModel, bandwidth_vs_xi, reference_operating_point, REF_XI


@pytest.fixture(scope="session")
def op():
    return reference_operating_point()


@pytest.fixture(scope="session")
def sim_spectrum(op):
    return op.spectrum()


@pytest.fixture(scope="session")
def sim_field(op):
    return op.input_field()


@pytest.fixture(scope="session")
def reference_sweep(op, sim_field):
    """The six-point read/write sweep at the calibrated operating point."""
    return bandwidth_vs_xi(REF_XI, sim_field, op.medium, op.schedule, op.decoherence)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in REPORT:
        terminalreporter.write_line(line)
