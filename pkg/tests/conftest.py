import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def report_line(request):
    """Record one summary line per acceptance criterion (printed at the end of the run)."""
    lines = request.config.stash.setdefault(_LINES, {})

    def record(number: int, passed: bool, message: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {message}"
        lines[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
