"""Shared fixtures and the acceptance report."""

import pytest
from oracles import naive_joint


@pytest.fixture
def oracle():
    return naive_joint


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.failed or report.skipped:
        ok = report.passed if report.when == "call" else False
        prev = _CRITERIA.get(number, (True, name))[0]
        _CRITERIA[number] = (prev and ok, name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, name = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  ({name})")
