from __future__ import annotations

import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(key: str, ok: bool, detail: str) -> None:
        line = f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[key] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(_ACCEPTANCE[key])
