import pytest

from decoyqkd.config import gys

# acceptance verdict lines, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def gys_profile():
    return gys()


@pytest.fixture(scope="session")
def gys_model(gys_profile):
    return gys_profile.channel


@pytest.fixture(scope="session")
def gys_settings(gys_profile):
    return gys_profile.settings


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
