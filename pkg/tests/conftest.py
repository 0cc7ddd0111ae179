import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def labelled_csv(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("x,y,label\n0.0,1.0,0\n2.5,-1.0,0\n10,10,1\n")
    return path


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _CRITERIA[marker.args[0]] = (marker.args[1], report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, outcome = _CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if outcome == 'passed' else 'FAIL'}] {number:2d}. {text}")
