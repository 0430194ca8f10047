import pytest

# acceptance criteria record "criterion N: PASS|FAIL ..." lines here
ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    def _record(number, ok, detail=""):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES[number] = line
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])

