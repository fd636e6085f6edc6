import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from povf import vdf  # noqa: E402


@pytest.fixture(scope="session", params=sorted(vdf.available_backends()))
def kernel(request):
    """Each available squaring kernel in turn."""
    return vdf.available_backends()[request.param]


@pytest.fixture(scope="session")
def small_params():
    return vdf.vdf_setup(64, 200, 20, b"tests")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
