import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed after the run."""

    def record(number, title, passed, detail):
        ACCEPTANCE_LINES.append(
            f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
        )
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
