import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from treeloc import ForestParams, generate_forest, radius_query

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def forest():
    return generate_forest(ForestParams(extent=(100.0, 100.0), density=400.0, seed=7))


@pytest.fixture(scope="session")
def scene(forest):
    return radius_query(forest, (50.0, 50.0), 15.0, scene_id=0)


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
