import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line; the lines are echoed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
