import math

import numpy as np
import pytest

from reeblab.fixtures import hopf_fibers, load_hopf_disk, reference_fiber
from reeblab.geometry import make_model
from reeblab.measures import CohomologyClass

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def sphere():
    return make_model("round_sphere")


@pytest.fixture(scope="session")
def ellipsoid():
    return make_model({"model": "ellipsoid", "a": 1.0, "b": math.sqrt(2.0)})


@pytest.fixture(scope="session")
def hopf_link(sphere):
    return reference_fiber(sphere)


@pytest.fixture(scope="session")
def hopf_dual(sphere, hopf_link):
    return CohomologyClass.linking_dual(sphere, [hopf_link])


@pytest.fixture(scope="session")
def hopf_disk_mesh():
    return load_hopf_disk()


@pytest.fixture(scope="session")
def fibers_100(sphere):
    return hopf_fibers(100, sphere)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
