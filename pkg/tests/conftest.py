import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """record(number, title, passed, detail) -> passed; collected for the summary."""
    def record(number, title, passed, detail):
        passed = bool(passed)
        _CRITERIA.append((number, title, passed, detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section('acceptance criteria')
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} -- {detail}")
