import time
import warnings

import pytest

from csidrive import StallWarning, parse_scenario, run_scenario, set_parameter

ACCEPTANCE_LINES = []


def with_params(sc=None, **params):
    """Copy of `sc` (default scenario if None) with dotted overrides, ``a__b`` = ``a.b``."""
    sc = parse_scenario() if sc is None else sc
    for key, value in params.items():
        sc = set_parameter(sc, key.replace("__", "."), value)
    return sc


@pytest.fixture(scope="session")
def default_scenario():
    return parse_scenario()


@pytest.fixture(scope="session")
def default_run(default_scenario):
    """(trace, metrics, wall seconds) of the shipped scenario, run once per session."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", StallWarning)
        t0 = time.perf_counter()
        trace, metrics = run_scenario(default_scenario)
        wall = time.perf_counter() - t0
    return trace, metrics, wall


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
