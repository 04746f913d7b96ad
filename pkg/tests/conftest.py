import pytest

from helpers import ACCEPTANCE_LINES, worked_graph


@pytest.fixture
def worked():
    return worked_graph()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
