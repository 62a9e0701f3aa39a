import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.user_properties and dict(report.user_properties).get("acceptance")
    if marker:
        _ACCEPTANCE.append((marker, report.outcome))


def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m is not None:
        item.user_properties.append(("acceptance", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    # A criterion passes only if every test carrying its marker passed.
    merged = {}
    for (number, title), outcome in _ACCEPTANCE:
        ok = merged.get(number, (title, True))[1]
        merged[number] = (title, ok and outcome == "passed")
    terminalreporter.section("acceptance criteria")
    for number in sorted(merged):
        title, ok = merged[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}")
