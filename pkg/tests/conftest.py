import math

import pytest

from wgscatter.model import EmitterSystem

OMEGA = 2e15
GAMMA1 = 2e4
DELTA = 1e14

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"{status}  criterion {number:>2}: {title}")
    passed = sum(1 for s, _ in _criteria.values() if s == "PASS")
    terminalreporter.write_line(f"{passed}/{len(_criteria)} criteria pass")


@pytest.fixture
def tls():
    return EmitterSystem.tls(OMEGA, GAMMA1)


@pytest.fixture
def lam():
    return EmitterSystem.lambda_system(OMEGA, GAMMA1, GAMMA1 / math.sqrt(2), 0.0, OMEGA / 10)


@pytest.fixture
def drive():
    return OMEGA + DELTA, OMEGA - DELTA
