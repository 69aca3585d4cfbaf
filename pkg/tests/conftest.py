import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ybqudit.atom import GHZ, MHZ, FieldConfig, builtin_spec

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# reference operating point: 500 G, -3 GHz, 15 MHz, m = -1/2
REF_POINT = dict(B=500.0, detuning=-3 * GHZ, rabi=15 * MHZ, m=-0.5)


@pytest.fixture(scope="session")
def spec3():
    return builtin_spec("Yb173_3P1")


@pytest.fixture(scope="session")
def spec1():
    return builtin_spec("Yb173_1P1")


@pytest.fixture(scope="session")
def refpoint_cfg():
    return FieldConfig(REF_POINT["B"], REF_POINT["detuning"], REF_POINT["rabi"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
