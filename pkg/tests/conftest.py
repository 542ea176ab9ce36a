import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from posechain import kernels
from posechain.se3 import RigidTransform

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Each kernel backend that imports in this environment."""
    return request.param


def random_pose(rng, angle_scale=1.0, t_scale=1.0) -> RigidTransform:
    rv = rng.normal(size=3)
    rv *= angle_scale * rng.uniform(0.0, np.pi) / np.linalg.norm(rv)
    return RigidTransform.from_rotvec(rv, t_scale * rng.normal(size=3))


# Acceptance verdicts, one line per criterion, collected by tests/test_acceptance.py.
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
