from __future__ import annotations

import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        _CRITERIA.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(_CRITERIA[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
