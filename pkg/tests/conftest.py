import numpy as np
import pytest

CRITERIA = {
    1: "formulation equivalence (conditional chi-square, unit G)",
    2: "compound Poisson equivalence (logarithmic, poisson, borel)",
    3: "(p,q) equivalence via the mean recursion",
    4: "latent-period law for q=1 and q=2",
    5: "branching reformulation of the pool",
    6: "ergodicity verdict equals kappa*mu < 1",
    7: "stationary approximation",
    8: "moment existence",
    9: "CLI determinism",
}

_outcomes: dict[int, list[bool]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(marker.args[0], []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, text in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {text}")
