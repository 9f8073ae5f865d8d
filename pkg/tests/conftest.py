import pytest

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_line(request):
    """Record one acceptance result; the lines are printed after the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, text):
        lines[number] = text

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
