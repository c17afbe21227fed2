"""Shared pytest hooks: per-criterion PASS/FAIL summary for the gate tests.

Tests named ``test_criterion_NN_*`` feed an end-of-run summary with one
line per numbered criterion, aggregated over every test sharing the number.
"""

import re
from collections import defaultdict

_CRITERION_RE = re.compile(r"test_criterion_(\d{2})")
_outcomes: dict[int, list[str]] = defaultdict(list)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = _CRITERION_RE.search(report.nodeid)
    if match:
        _outcomes[int(match.group(1))].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        outcomes = _outcomes[number]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number}: {status}")
    _outcomes.clear()
