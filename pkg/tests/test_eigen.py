import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from conewalk import eigen
from conewalk.eigen import EigenTable, circular_cone_lambda1, p_exponent, wedge_lambda1


def test_hemisphere_value():
    t = circular_cone_lambda1(math.pi / 2, 4096)
    assert t.lambda1 == pytest.approx(2.0, abs=1e-3)
    assert p_exponent(t.lambda1, 3) == pytest.approx(1.0, abs=1e-3)
    # ground state is cos(theta) up to normalisation
    np.testing.assert_allclose(t.m1(t.theta_grid), np.cos(t.theta_grid), atol=2e-3)


def test_mesh_doubling_converges_at_second_order():
    lam = [circular_cone_lambda1(math.pi / 3, m).lambda1 for m in (512, 1024, 2048)]
    assert abs(lam[0] - lam[1]) / abs(lam[1] - lam[2]) >= 3.5


@pytest.mark.parametrize("theta0", [0.4, math.pi / 3, math.pi / 2, 2.0, 2.8])
def test_matches_dense_tridiagonal_solver(theta0):
    mesh = 800
    _, diag, off, weight = eigen._pencil(theta0, mesh)
    s = 1 / np.sqrt(weight)
    w = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], eigvals_only=True, select="i", select_range=(0, 0))
    assert circular_cone_lambda1(theta0, mesh).lambda1 == pytest.approx(w[0], rel=1e-10)


def test_monotone_in_angle():
    lams = [circular_cone_lambda1(t, 512).lambda1 for t in (0.5, 1.0, 1.5, 2.0, 2.5)]
    assert all(a > b for a, b in zip(lams, lams[1:]))


def test_ground_state_is_positive_and_normalised():
    t = circular_cone_lambda1(2.0, 1024)
    vals = t.m1(t.theta_grid[:-1])
    assert np.all(vals > 0)
    assert np.max(t.m1_values) == pytest.approx(1.0)
    assert t.m1(2.0) == pytest.approx(0.0, abs=1e-9)
    assert t.est_error >= 0


def test_p_exponent_formula():
    with pytest.raises(ValueError):
        p_exponent(0.0, 3)
    assert p_exponent(2.0, 3) == pytest.approx(1.0)
    # d = 2: lambda = p^2
    assert p_exponent(2.25, 2) == pytest.approx(1.5)
    assert wedge_lambda1(2 * math.pi / 3) == pytest.approx(2.25)


def test_save_load_roundtrip(tmp_path):
    t = circular_cone_lambda1(math.pi / 3, 256)
    t.save(tmp_path / "tab")
    u = EigenTable.load(tmp_path / "tab")
    assert u.lambda1 == t.lambda1
    np.testing.assert_array_equal(u.m1_values, t.m1_values)
    assert u.theta0 == t.theta0
