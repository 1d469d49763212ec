import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cpinverse.materials import gold_preset
from cpinverse.sim import SimulationConfig

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(n: int, passed: bool, detail: str):
    line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def cfg2d():
    return SimulationConfig(2, 6.0, 10, 1.0, 0.5, 30.0)


@pytest.fixture
def gold():
    return gold_preset("gold")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
