import math

import pytest

from tspqa.instances import TspInstance


@pytest.fixture
def unit_square():
    return TspInstance.from_coords([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture
def two_triangles():
    """Two tight triangles far apart: cities 0-2 near the origin, 3-5 far away."""
    return TspInstance.from_coords(
        [(0.0, 0.0), (0.05, 0.0), (0.0, 0.05), (0.9, 0.9), (0.95, 0.9), (0.9, 0.95)]
    )


@pytest.fixture
def hexagon():
    return TspInstance.from_coords(
        [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
