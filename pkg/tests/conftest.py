import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tvmanifold.mesh import build_disk, build_flat_torus, build_icosphere

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere3():
    return build_icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return build_icosphere(4)


@pytest.fixture(scope="session")
def sphere5():
    return build_icosphere(5)


@pytest.fixture(scope="session")
def torus32():
    return build_flat_torus(32)


@pytest.fixture(scope="session")
def torus64():
    return build_flat_torus(64)


@pytest.fixture(scope="session")
def torus128():
    return build_flat_torus(128)


@pytest.fixture(scope="session")
def unit_disk():
    return build_disk(1.0, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


pytest.acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if pytest.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in pytest.acceptance_lines:
            terminalreporter.write_line(line)
