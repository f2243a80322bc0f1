import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from modfix import Domain, Mapping, power_modular

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Log one acceptance line ``[PASS|FAIL] name: detail`` and return the flag."""

    def _record(name, passed, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rho2():
    return power_modular(2, 2.0)


@pytest.fixture
def half_shift():
    """``x -> 0.5 x + (1, 0)`` on the plane; fixed point (2, 0)."""
    b = np.array([1.0, 0.0])
    return Mapping(lambda x: 0.5 * x + b, Domain.whole_space(2), "half_shift", affine=(0.5 * np.eye(2), b))
