import math
import sys

import pytest

from flatmod.surface import regular_polygon_sphere, square_torus, triangle_sphere
from flatmod.surgeries import s2, s3_devil

PI = math.pi


def labels_with_angle(surface, theta, tol=1e-7):
    return [L for L, a in surface.cone_angles().items() if abs(a - theta) < tol]


@pytest.fixture(scope="session")
def sphere():
    """Double of the right isosceles triangle: angles (pi/2, pi/2, pi)."""
    return triangle_sphere(PI / 4, PI / 4)


@pytest.fixture(scope="session")
def square():
    return square_torus()


@pytest.fixture(scope="session")
def quad_sphere():
    return regular_polygon_sphere(4)


@pytest.fixture(scope="session")
def devil(sphere):
    a, b = labels_with_angle(sphere, PI / 2)
    return s3_devil(sphere, a, b, 0.1 + 0.02j)


@pytest.fixture(scope="session")
def torus_3pi_pi(devil):
    return devil.surface


@pytest.fixture(scope="session")
def thurston2(torus_3pi_pi):
    p = labels_with_angle(torus_3pi_pi, 3 * PI)[0]
    return s2(torus_3pi_pi, p, (7, 4), 0.03 + 0.01j)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
