"""Shared pytest plumbing.

The acceptance tests register one summary line per criterion; the hook
below prints them all at the end of the run so the verdicts are visible
even when every test passes (pytest swallows stdout otherwise).
"""

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Callable fixture: acceptance tests record their PASS/FAIL line."""

    def record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
