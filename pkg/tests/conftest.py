import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict = {}


@pytest.fixture
def acceptance():
    """Record the verdict of one acceptance criterion for the end-of-run summary."""
    def record(number: int, title: str, passed, detail: str = ""):
        # passed=None marks a skipped criterion
        _RESULTS[number] = (title, passed if passed is None else bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, detail = _RESULTS[number]
        verdict = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{verdict}  [{number}] {title}: {detail}")
