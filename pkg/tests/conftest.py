import sys

import pytest
from hypothesis import HealthCheck, settings

from symcascade.fixtures import attacked_addition_model, addition_model

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much]
)
settings.load_profile("default")


@pytest.fixture
def addition():
    return addition_model()


@pytest.fixture
def attacked():
    return attacked_addition_model()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 6):
        line = module.RESULTS.get(number, f"[FAIL] criterion {number}: did not run to completion")
        terminalreporter.write_line(line)
