"""Shared pytest wiring for the test suite.

The acceptance tests register one human-readable line per criterion via
``record_acceptance``; the terminal-summary hook prints all registered
lines in a dedicated section at the end of the run, so a plain
``pytest`` invocation always ends with one visible pass/fail line per
acceptance criterion.
"""

from __future__ import annotations

from typing import List

ACCEPTANCE_LINES: List[str] = []


def record_acceptance(line: str) -> None:
    """Register a criterion result line for the end-of-run summary."""
    if line not in ACCEPTANCE_LINES:
        ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
