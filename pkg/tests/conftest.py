"""Shared test configuration.

Acceptance tests register one outcome per criterion; the hook below
prints a compact pass/fail line for each at the end of the run.
"""

ACCEPTANCE_RESULTS = []


def record_criterion(name: str, ok: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
