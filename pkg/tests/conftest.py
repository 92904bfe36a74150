import os

import pytest
from hypothesis import HealthCheck, settings

from turing_lab.kinetics import Linearization, benchmark, benchmark_cubic, linearize

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture
def bench_lin() -> Linearization:
    return Linearization(1.0, -2.0, 3.0, -4.0, 0.5, 20.0)


@pytest.fixture
def bench_system():
    return benchmark()


@pytest.fixture
def cubic_system():
    return benchmark_cubic()


@pytest.fixture
def record_acceptance():
    def record(number: int, name: str, passed: bool, detail: str):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
