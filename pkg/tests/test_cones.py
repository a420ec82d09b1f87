import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.cones import Cone, ConeKind, InteriorSetParams, in_interior_set


def test_membership_basic():
    assert Cone.half_line().contains([0.5])
    assert not Cone.half_line().contains([0.0])
    assert not Cone.half_line().contains([-1.0])
    q = Cone.orthant(2)
    assert q.contains([1, 2]) and not q.contains([1, -2]) and not q.contains([0, 1])
    w = Cone.wedge(2 * math.pi / 3)
    assert w.contains([-0.1, 1.0])  # polar angle just above pi/2
    assert not w.contains([-1.0, 0.5])  # angle ~ 2.68 > 2pi/3
    c = Cone.circular(math.pi / 3)
    assert c.contains([0, 0, 1]) and not c.contains([1, 0, 0.1])


def test_wide_wedge_is_not_convex():
    w = Cone.wedge(3 * math.pi / 2)
    assert w.contains([-1.0, -0.5]) and w.contains([1.0, 0.5])
    assert not w.contains([0.5, -1.0])


def test_distance_examples():
    assert Cone.half_space(3).dist_boundary([5, -2, 1.5]) == pytest.approx(1.5)
    assert Cone.orthant(2).dist_boundary([3, 1]) == pytest.approx(1.0)
    # quarter wedge agrees with the orthant
    assert Cone.wedge(math.pi / 2).dist_boundary([3, 1]) == pytest.approx(1.0)
    # in a wide wedge the nearest boundary point can be the apex
    w = Cone.wedge(3 * math.pi / 2)
    assert w.dist_boundary([-1.0, 0.5]) == pytest.approx(math.sqrt(1.25))
    assert w.dist_boundary([-1.0, -1e-3]) == pytest.approx(1.0)
    # circular cone: perpendicular distance to the generator
    c = Cone.circular(math.pi / 4)
    assert c.dist_boundary([0, 0, 1]) == pytest.approx(math.sin(math.pi / 4))


def test_distance_outside_is_zero():
    assert Cone.orthant(2).dist_boundary([-1, 5]) == 0.0


def test_product_form_convention():
    assert Cone.orthant(2).product_form
    assert Cone.wedge(math.pi / 2).product_form
    assert not Cone.wedge(2 * math.pi / 3).product_form


def test_exponents():
    assert Cone.half_line().p == 1
    assert Cone.half_space(4).p == 1
    assert Cone.orthant(3).p == 3
    assert Cone.wedge(2 * math.pi / 3).p == pytest.approx(1.5)
    assert Cone.circular(math.pi / 2, 1024).p == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("name, kind", [("half-line", ConeKind.HALF_LINE), ("half_space", ConeKind.HALF_SPACE),
                                        ("wedge", ConeKind.WEDGE), ("Orthant", ConeKind.ORTHANT),
                                        ("circular", ConeKind.CIRCULAR)])
def test_from_config(name, kind):
    c = Cone.from_config(name, 3 if kind in (ConeKind.HALF_SPACE, ConeKind.ORTHANT) else None, 1.0, 256)
    assert c.kind is kind


def test_from_config_rejects():
    with pytest.raises(ValueError):
        Cone.from_config("pyramid")
    with pytest.raises(ValueError):
        Cone.from_config("orthant")
    with pytest.raises(ValueError):
        Cone.wedge(7.0)
    with pytest.raises(ValueError):
        Cone.circular(math.pi)


def test_starlike_data(any_cone):
    x0, r0 = any_cone.starlike_data()
    assert np.linalg.norm(x0) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    pts = any_cone.sample_interior(500, rng, rmin=1e-3, rmax=1e3)
    shifted = pts + r0 * x0
    assert np.all(any_cone._contains(shifted))
    assert np.all(any_cone._dist(shifted) > 1.0)


def test_sample_interior_inside(any_cone):
    pts = any_cone.sample_interior(300, np.random.default_rng(1))
    assert pts.shape == (300, any_cone.dimension)
    assert np.all(any_cone._contains(pts))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.floats(1e-3, 1e3))
def test_scaling_invariance(x, lam):
    for c in (Cone.orthant(2), Cone.wedge(2 * math.pi / 3), Cone.wedge(3 * math.pi / 2), Cone.half_space(2)):
        x_arr = np.array(x)
        assert c.contains(x_arr) == c.contains(lam * x_arr)
        assert c.dist_boundary(lam * x_arr) == pytest.approx(lam * c.dist_boundary(x_arr), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), st.lists(st.floats(-20, 20), min_size=2, max_size=2))
def test_distance_is_lipschitz(x, y):
    c = Cone.wedge(2 * math.pi / 3)
    dx, dy = c.dist_boundary(x), c.dist_boundary(y)
    if c.contains(x) and c.contains(y):
        assert abs(dx - dy) <= np.linalg.norm(np.subtract(x, y)) + 1e-9


def test_interior_sets():
    c = Cone.half_space(2)
    plain = InteriorSetParams(100, 0.25)
    assert in_interior_set(c, plain, [0, 3.2])
    assert not in_interior_set(c, plain, [0, 3.1])
    shifted = InteriorSetParams(100, 0.25, "shifted")
    # threshold (10**0.5 + |x| / 10) / 2
    x = np.array([0.0, 2.0])
    assert in_interior_set(c, shifted, x) == (2.0 >= 0.5 * (10 ** 0.5 + 2.0 / 10))
    with pytest.raises(ValueError):
        InteriorSetParams(100, 0.6)
