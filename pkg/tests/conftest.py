import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """record(n, passed, detail) stores one acceptance line for the terminal summary."""

    def record(n: int, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[n] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
