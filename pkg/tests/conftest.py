import pytest

_acceptance_lines = []


@pytest.fixture
def criterion():
    """Collect a one-line verdict to echo in the terminal summary."""

    def record(line: str) -> None:
        _acceptance_lines.append(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
