import pytest

from twotier.channel import estimate_shadow_moments
from twotier.params import reference_params


@pytest.fixture(scope="session")
def params():
    return reference_params()


@pytest.fixture(scope="session")
def moments(params):
    return estimate_shadow_moments(params)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
