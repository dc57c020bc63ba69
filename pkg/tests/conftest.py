"""Shared pytest hooks.

Acceptance tests register one summary line per criterion; the terminal
summary prints them unconditionally (stdout of passing tests is captured
and would otherwise hide the PASS lines).
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
