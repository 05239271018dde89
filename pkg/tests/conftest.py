import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def report(request, capsys):
    """``report(criterion, ok, detail)`` records one PASS/FAIL line and returns `ok`."""

    def _report(criterion, ok, detail=""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        request.config._acceptance_lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
