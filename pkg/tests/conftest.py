import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Log one acceptance line; the terminal summary prints them all."""
    def record(number, passed, detail=""):
        _ACCEPTANCE[str(number)] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE, key=str):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
