"""Shared fixtures and the acceptance result banner."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

# allow running the suite from a checkout without an editable install
_SRC = Path(__file__).resolve().parent.parent / "src"
try:
    import ranwatch  # noqa: F401
except ImportError:
    sys.path.insert(0, str(_SRC))

# criterion number -> (description, status)
_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}
_EXPECTED_CRITERIA = 10


@pytest.fixture
def acceptance():
    """Recorder for acceptance criteria outcomes.

    Tests call ``acceptance(n, description, ok)`` before asserting so the
    terminal banner shows one line per criterion even when the assert
    fires. Skipped criteria record the string "SKIP" as their outcome.
    """

    def record(criterion: int, description: str, outcome: bool | str) -> None:
        if isinstance(outcome, str):
            status = outcome
        else:
            status = "PASS" if outcome else "FAIL"
        _ACCEPTANCE_RESULTS[criterion] = (description, status)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, _EXPECTED_CRITERIA + 1):
        if n in _ACCEPTANCE_RESULTS:
            description, status = _ACCEPTANCE_RESULTS[n]
            terminalreporter.write_line(f"ACCEPTANCE {n}: {status} - {description}")
        else:
            terminalreporter.write_line(
                f"ACCEPTANCE {n}: NOT RECORDED - test errored before the check ran"
            )
