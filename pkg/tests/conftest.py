import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from greencell.scenario import generate_scenario

settings.register_profile("ci", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

DEFAULT_SEED = 7


@pytest.fixture(scope="session")
def small_scenario():
    return generate_scenario(3, 6, 3, days=2)


@pytest.fixture(scope="session")
def default_scenario():
    """Default desk-scale city: 45 stations, 7 days."""
    return generate_scenario(DEFAULT_SEED, 30, 15, days=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
