import pytest

ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Collect one summary line per acceptance criterion."""

    def add(number: int, ok: bool, text: str) -> None:
        ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
