import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if not REPORT:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(REPORT):
        title, ok, summary = REPORT[number]
        tr.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {summary}")
