import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.get_closest_marker("acceptance") and report.when == "call":
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _criteria.append((item.name, "PASS" if report.passed else "FAIL", title,
                          report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, title, seconds in sorted(_criteria):
        terminalreporter.write_line(f"{status}  {title}  ({seconds:.1f} s)")
