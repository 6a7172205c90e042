import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria = {}


def pytest_runtest_logreport(report):
    # one PASS/FAIL line per acceptance criterion, printed after the run
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria[name] = "PASS" if report.outcome == "passed" and _criteria.get(name) != "FAIL" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        number, _, title = name[len("test_criterion_"):].partition("_")
        terminalreporter.write_line(f"criterion {number} ({title.replace('_', ' ')}): {_criteria[name]}")
