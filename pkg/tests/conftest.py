import os
import re
import sys

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"::test_ac(\d+)_", report.nodeid)
    if m is None:
        return
    name = f"AC{m.group(1)}"
    props = dict(report.user_properties)
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        _CRITERIA[name] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n[2:])):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{status} {name}: {detail}")
