"""Shared test plumbing: a visible one-line verdict per acceptance criterion."""

import pytest

_CRITERION_LINES = []


@pytest.fixture(scope="session")
def criterion():
    """Record a pass/fail line for one acceptance criterion.

    Usage: criterion(4, ok, "recall >= 95% ..."). The line is printed
    immediately and repeated in the terminal summary, so the verdicts
    survive pytest's output capture.
    """
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERION_LINES.append((str(number), line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    # numbers are "1".."9" plus "5a".."5c"; string order is the report order
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
