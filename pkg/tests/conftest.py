import pytest

_CRITERIA = []


class CriterionLog:
    def record(self, name: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA.append((name, passed, detail))
        return passed


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
