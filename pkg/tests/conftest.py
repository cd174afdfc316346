"""Shared test configuration: prints one line per acceptance criterion."""

from __future__ import annotations


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            # a test errors/fails in any phase -> not a pass
            if outcomes.get(name) != "failed":
                outcomes[name] = "failed" if status in ("failed", "error") else "passed"
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(outcomes):
        verdict = "PASS" if outcomes[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
