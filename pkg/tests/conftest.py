import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store and print the outcome of one acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        CRITERIA[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
