import math
import sys

import pytest

from conewalk import kernels
from conewalk.cones import Cone

ALL_CONES = {
    "half-line": Cone.half_line(),
    "half-plane": Cone.half_space(2),
    "half-space-3": Cone.half_space(3),
    "orthant-2": Cone.orthant(2),
    "orthant-3": Cone.orthant(3),
    "quarter-wedge": Cone.wedge(math.pi / 2),
    "wedge-2pi3": Cone.wedge(2 * math.pi / 3),
    "wedge-3pi2": Cone.wedge(3 * math.pi / 2),
    "circular-pi3": Cone.circular(math.pi / 3, 1024),
    "circular-pi2": Cone.circular(math.pi / 2, 1024),
}


@pytest.fixture(params=sorted(ALL_CONES))
def any_cone(request):
    return ALL_CONES[request.param]


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        terminalreporter.write_line(results[key].line())
