import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helpers import edges_graph

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


@pytest.fixture
def two_triangles():
    return edges_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def k4():
    return edges_graph([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def path4():
    return edges_graph([(0, 1), (1, 2), (2, 3)])


# --- acceptance summary ----------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the outcome is filled in by the report hook."""
    def note(number, detail):
        ACCEPTANCE[request.node.nodeid] = [number, detail, None]
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = ACCEPTANCE.get(item.nodeid)
    if entry is not None and rep.when == "call":
        entry[2] = rep.passed
    elif entry is not None and rep.failed and entry[2] is None:
        entry[2] = False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, detail, passed in sorted(ACCEPTANCE.values(), key=lambda e: e[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
