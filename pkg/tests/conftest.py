import pytest

_CRITERIA = []


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number:>2}: {status}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
