import numpy as np
import pytest

from masteryhmm.hmm_core import DiscreteEmission, HmmModel

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "_acceptance", None)
    if marker is None:
        return
    number, title = marker
    ok, _ = _ACCEPTANCE.get(number, (True, title))
    _ACCEPTANCE[number] = (ok and report.outcome == "passed", title)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result()._acceptance = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def two_state_model():
    """Well-separated, sticky two-state model over four symbols."""
    return HmmModel(
        [0.5, 0.5],
        [[0.85, 0.15], [0.2, 0.8]],
        DiscreteEmission([[0.7, 0.2, 0.07, 0.03], [0.03, 0.07, 0.2, 0.7]]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20190101)
