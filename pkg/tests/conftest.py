import time

import pytest

_LINES = {}


class AcceptanceRecorder:
    """Collects one verdict line per acceptance criterion."""

    def __init__(self, number, limit):
        self.number, self.limit = number, limit
        self.start = time.perf_counter()

    def finish(self, passed, detail=""):
        elapsed = time.perf_counter() - self.start
        ok = bool(passed) and elapsed < self.limit
        verdict = "PASS" if ok else "FAIL"
        line = f"criterion {self.number:>2}: {verdict}  {elapsed:7.2f} s (limit {self.limit:g} s)  {detail}"
        _LINES[self.number] = line
        print(line)
        return ok, elapsed


@pytest.fixture
def criterion():
    return AcceptanceRecorder


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
