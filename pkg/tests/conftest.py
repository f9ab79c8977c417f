from __future__ import annotations

import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(name: str, checks: dict) -> None:
        failed = [k for k, (ok, _) in checks.items() if not ok]
        detail = "; ".join(f"{k} [{'ok' if ok else 'FAIL'}]: {info}" for k, (ok, info) in checks.items())
        line = f"{'PASS' if not failed else 'FAIL'} {name} | {detail}"
        _LINES.append(line)
        print(line)
        assert not failed, f"{name} failed: {', '.join(failed)}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
