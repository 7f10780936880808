import pytest

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def report(request):
    """Record the one-line verdict of an acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number, passed, detail):
        # parts of one criterion share a line; it passes only if every part does
        ok, text = lines.get(number, (True, ""))
        ok, text = ok and passed, f"{text}; {detail}" if text else detail
        lines[number] = (ok, text)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[ACCEPTANCE]
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            ok, text = lines[k]
            terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
