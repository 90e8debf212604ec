"""Print one pass/fail line per acceptance criterion after the run."""

import re

_ACCEPTANCE_FILE = "test_acceptance.py"
_results: dict[str, tuple[int, str, str]] = {}

_NAME_RE = re.compile(r"test_c(\d+)_([a-z0-9_]+)")


def pytest_runtest_logreport(report):
    if _ACCEPTANCE_FILE not in report.nodeid:
        return
    m = _NAME_RE.search(report.nodeid)
    if not m:
        return
    num, slug = int(m.group(1)), m.group(2).replace("_", " ")
    if report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
        _results[report.nodeid] = (num, slug, outcome)
    elif report.when == "setup" and (report.failed or report.skipped):
        outcome = "SKIP" if report.skipped else "FAIL"
        _results[report.nodeid] = (num, slug, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, slug, outcome in sorted(_results.values()):
        tr.write_line(f"criterion {num:02d} {slug:<42s} {outcome}")
