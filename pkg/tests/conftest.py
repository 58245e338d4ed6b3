import numpy as np
import pytest

from cgqn import qpa

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def qp_a():
    return qpa()


@pytest.fixture
def qpa_step1():
    """Hand-computed first CG step on H = diag(2, 4), c = (-2, -4)."""
    return {
        "g0": np.array([-2.0, -4.0]),
        "p0": np.array([2.0, 4.0]),
        "g1": np.array([-8.0 / 9.0, 4.0 / 9.0]),
        "p1_cg": np.array([80.0 / 81.0, -20.0 / 81.0]),
        "theta0": 5.0 / 18.0,
        "gnorm2": 80.0 / 81.0,
        "curvature": 20.0,
    }


def pytest_runtest_logreport(report):
    criterion = getattr(report, "criterion", None)
    if criterion is None:
        for name, value in report.user_properties:
            if name == "criterion":
                criterion = value
    if criterion is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ACCEPTANCE_RESULTS.setdefault(criterion, []).append((report.outcome, report.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        results = ACCEPTANCE_RESULTS[number]
        label = "PASS" if all(outcome == "passed" for outcome, _ in results) else "FAIL"
        names = ", ".join(nodeid.split("::")[-1] for _, nodeid in results)
        terminalreporter.write_line(f"criterion {number:2d}: {label}  {names}")
