import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line; call as ``criterion(n, title, passed, detail)``."""
    def record(number, title, passed, detail="", status=None):
        status = status or ("PASS" if passed else "FAIL")
        _LINES.append((number, f"[{status}] criterion {number}: {title} ({detail})"))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
