"""Prints the acceptance-criteria block after the run, one line per criterion."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = None
    for name, mod in sys.modules.items():
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            results = getattr(mod, "RESULTS", None)
            break
    if not results:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for line in results:
        terminalreporter.write_line(line)
