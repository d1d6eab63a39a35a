import pytest

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one acceptance line; the summary hook prints them in criterion order."""
    def _record(criterion, ok, detail):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
