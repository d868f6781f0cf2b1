import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Append an acceptance line; all lines are printed in the terminal summary."""
    store = request.config.stash.setdefault(_RESULTS, [])

    def _record(label, passed, detail):
        store.append(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
