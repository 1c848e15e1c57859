import time

import numpy as np
import pytest

SUITE_BUDGET_S = 120.0
_lines = []
_start = time.perf_counter()


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


class _Recorder:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; the verdict is printed in the summary."""
    marker = request.node.get_closest_marker("criterion")
    rec = _Recorder(*marker.args)
    yield rec
    failed = getattr(request.node, "_failed", True)
    verdict = "FAIL" if failed else "PASS"
    detail = "; ".join(rec.details)
    _lines.append((rec.number, f"criterion {rec.number:>2} {verdict}: {rec.title}" + (f" [{detail}]" if detail else "")))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        item._failed = report.failed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _start
    if _lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_lines):
            terminalreporter.write_line(line)
    verdict = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    terminalreporter.write_line(f"whole suite wall time {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s): {verdict}")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _start >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
