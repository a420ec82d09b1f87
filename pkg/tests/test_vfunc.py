import math

import numpy as np
import pytest
from scipy.stats import binom

from conewalk import vfunc
from conewalk.cones import Cone
from conewalk.harmonic import HarmonicForm
from conewalk.laws import IncrementLaw, LawKind

RAD1 = IncrementLaw(LawKind.RADEMACHER, 1)
RAD2 = IncrementLaw(LawKind.RADEMACHER, 2)
GAU1 = IncrementLaw(LawKind.GAUSSIAN, 1)
GAU2 = IncrementLaw(LawKind.GAUSSIAN, 2)
HALF_LINE = HarmonicForm(Cone.half_line())
ORTHANT = HarmonicForm(Cone.orthant(2))
HALF_PLANE = HarmonicForm(Cone.half_space(2))


def srw_survival(x, k):
    return float(binom.cdf(math.floor((k + x) / 2), k, 0.5) - binom.cdf(math.floor((k - x) / 2), k, 0.5))


def shifted_expectation_orthant(x, k, shift):
    """E[u(x + g_k + S_k); tau > k] for the +-1 product walk: prod_i (x_i + s_i P(tau_{x_i} > k))."""
    s = shift.value(k)
    return float(np.prod([xi + si * srw_survival(xi, k) for xi, si in zip(x, s)]))


# ---- shifts and schedules ----------------------------------------------------

def test_shift_defaults():
    sh = vfunc.ShiftSequence.for_cone(HALF_LINE)
    assert sh.gamma == pytest.approx(0.125)
    assert sh.R0 == 2.0
    assert sh.value(16)[0] == pytest.approx(2 * 16 ** 0.375)
    assert sh.table(3).shape == (4, 1)
    assert np.all(sh.table(3)[0] == 0)
    assert vfunc.ShiftSequence.for_cone(ORTHANT).R0 == 2.0
    assert vfunc.ShiftSequence.for_cone(Cone.wedge(math.pi / 4)).R0 == pytest.approx(2 / math.sin(math.pi / 8))


@pytest.mark.parametrize("gamma", [0.0, 0.5, -0.1, 0.7])
def test_shift_gamma_range(gamma):
    with pytest.raises(ValueError):
        vfunc.ShiftSequence.for_cone(HALF_LINE, gamma)


def test_shift_increment_constant_bounded():
    sh = vfunc.ShiftSequence.for_cone(HALF_PLANE, 0.2)
    c1, c2 = sh.increment_constant(100), sh.increment_constant(10_000)
    assert c2 < 1.01 * c1 + 1e-12 or c2 < 1.0


def test_schedule_terms():
    assert vfunc.Schedule(64, 1 / 3, 2).terms == [64, 512, 11585]
    assert vfunc.Schedule(100, 0.1, 2).terms == [100, 166, 294]
    assert vfunc.Schedule.up_to(64, 1 / 3, 10_000).m_max == 1
    with pytest.raises(ValueError):
        vfunc.Schedule(64, 0.6)


# ---- exact oracles -------------------------------------------------------------

@pytest.mark.parametrize("x, k", [(1, 16), (5, 256), (5, 1024)])
def test_direct_value_is_exactly_harmonic_on_half_line(x, k):
    est = vfunc.estimate_direct(HALF_LINE, RAD1, [x], k, 200_000, seed=2)
    assert est.covers(float(x), z=4)


def test_direct_value_at_zero_horizon():
    est = vfunc.estimate_direct(ORTHANT, RAD2, [2, 3], 0, 10, 0)
    assert est.mean == 6.0 and est.stderr == 0.0


@pytest.mark.parametrize("k", [16, 256, 4096])
def test_shifted_value_matches_exact_biased_value_half_line(k):
    sh = vfunc.ShiftSequence.for_cone(HALF_LINE)
    est = vfunc.estimate_shifted(HALF_LINE, RAD1, [5.0], k, sh, 200_000, seed=3)
    exact = 5.0 + sh.value(k)[0] * srw_survival(5, k)
    assert est.covers(exact, z=4)


@pytest.mark.parametrize("x, k", [((2, 3), 64), ((1, 1), 256)])
def test_shifted_value_matches_product_formula(x, k):
    sh = vfunc.ShiftSequence.for_cone(ORTHANT)
    est = vfunc.estimate_shifted(ORTHANT, RAD2, list(x), k, sh, 200_000, seed=4)
    assert est.covers(shifted_expectation_orthant(x, k, sh), z=4)


def test_ratio_matches_product_formula():
    sh = vfunc.ShiftSequence.for_cone(ORTHANT)
    k = 256
    r = vfunc.ratio_construction1(ORTHANT, RAD2, [2, 3], [1, 1], sh, k, 400_000, seed=5)
    exact = shifted_expectation_orthant((2, 3), k, sh) / shifted_expectation_orthant((1, 1), k, sh)
    assert abs(r["ratio"] - exact) <= 4 * r["stderr"]


# ---- decomposition -------------------------------------------------------------

@pytest.mark.parametrize("form, law, x", [(HALF_LINE, RAD1, [3.0]), (ORTHANT, RAD2, [1.0, 2.0]),
                                          (HALF_PLANE, GAU2, [0.5, 1.0]),
                                          (HarmonicForm(Cone.wedge(2 * math.pi / 3)), GAU2, [0.2, 1.0]),
                                          (HarmonicForm(Cone.circular(math.pi / 3, 1024)),
                                           IncrementLaw(LawKind.SPHERE, 3), [0.1, 0.0, 1.5])])
def test_decomposition_identity(form, law, x):
    dec = vfunc.decompose_paths(form, law, x, [1, 8, 64, 256], vfunc.ShiftSequence.for_cone(form), 20_000, 7)
    assert dec.identity_violations == 0
    assert dec.max_identity_error <= 1e-9 * max(1, dec.u0)
    assert dec.w1_monotone_violations == 0
    for i in range(4):
        assert dec.rebuilt(i) == pytest.approx(dec.lhs[i].mean, rel=1e-9, abs=1e-9)


def test_decomposition_grid_equals_single_horizon():
    sh = vfunc.ShiftSequence.for_cone(HALF_PLANE)
    a = vfunc.decompose_paths(HALF_PLANE, GAU2, [0, 1], [16, 64], sh, 5000, 1)
    b = vfunc.decompose_paths(HALF_PLANE, GAU2, [0, 1], 64, sh, 5000, 1)
    assert a.lhs[-1].mean == b.lhs[-1].mean


def test_one_step_discrepancy_half_plane():
    for z in (0.3, 1.0, 2.5):
        est = vfunc.f_hat(HALF_PLANE, GAU2, [0.0, z], 400_000, 8)
        assert est.covers(float(vfunc.gaussian_halfspace_f(z)), z=4)


def test_compensator_exact_f_vs_inner_average():
    sh = vfunc.ShiftSequence.for_cone(HALF_PLANE)
    exact_f = lambda pts: vfunc.gaussian_halfspace_f(pts[:, -1])  # noqa: E731
    a = vfunc.expected_w3(HALF_PLANE, GAU2, [0, 1], 32, sh, 4000, 9, f=exact_f)
    b = vfunc.expected_w3(HALF_PLANE, GAU2, [0, 1], 32, sh, 4000, 9, inner=64)
    assert abs(a.mean - b.mean) < 4 * math.hypot(a.stderr, b.stderr) + 1e-3


def test_compensator_matches_mean_of_w3():
    sh = vfunc.ShiftSequence.for_cone(HALF_PLANE)
    exact_f = lambda pts: vfunc.gaussian_halfspace_f(pts[:, -1])  # noqa: E731
    a = vfunc.expected_w3(HALF_PLANE, GAU2, [0, 1], 64, sh, 20_000, 10, f=exact_f)
    dec = vfunc.decompose_paths(HALF_PLANE, GAU2, [0, 1], 64, sh, 20_000, 11)
    assert abs(a.mean - dec.w3[-1].mean) < 4 * math.hypot(a.stderr, dec.w3[-1].stderr)


# ---- estimators ---------------------------------------------------------------

def test_construction2_recovers_exact_value():
    v, rows = vfunc.estimate_v_construction2(HALF_LINE, RAD1, [5.0], vfunc.Schedule(64, 1 / 3, 2), 200_000, 12)
    assert v.covers(5.0, z=4)
    assert not v.flags
    assert rows[1]["ratio"] == pytest.approx(1.0, abs=0.05)


def test_construction2_rejects_short_schedule():
    with pytest.raises(ValueError):
        vfunc.estimate_v_construction2(HALF_LINE, RAD1, [5.0], vfunc.Schedule(16, 0.1, 2), 1000, 0)


def test_construction1_grid_requirements():
    with pytest.raises(ValueError):
        vfunc.estimate_v_construction1(HALF_LINE, RAD1, [5.0], None, [64, 128, 256, 4096 // 2], 1000, 0)
    with pytest.raises(ValueError):
        vfunc.estimate_v_construction1(HALF_LINE, RAD1, [5.0], None, [16, 4096], 1000, 0)


def test_construction1_tracks_exact_biased_value():
    sh = vfunc.ShiftSequence.for_cone(HALF_LINE)
    v, diag = vfunc.estimate_v_construction1(HALF_LINE, RAD1, [5.0], sh, [16, 64, 256, 1024, 4096], 200_000, 13)
    exact = 5.0 + sh.value(4096)[0] * srw_survival(5, 4096)
    assert v.covers(exact, z=4)
    assert diag["k_grid"] == [16, 64, 256, 1024, 4096]


@pytest.mark.xfail(strict=True, reason="the shifted estimate converges to u(x) + g_k P(tau > k), which grows like "
                                        "k**(-gamma); at desk-scale k it sits far above V(x) (see decisions ledger)")
def test_construction1_within_two_percent_on_half_line():
    v, _ = vfunc.estimate_v_construction1(HALF_LINE, RAD1, [5.0], None, [16, 64, 256, 1024, 4096], 200_000, 14)
    assert abs(v.mean - 5.0) / 5.0 <= 0.02


@pytest.mark.xfail(strict=True, reason="same shift bias as above, on the orthant")
def test_construction1_value_on_orthant():
    v, _ = vfunc.estimate_v_construction1(ORTHANT, RAD2, [2.0, 3.0], None, [16, 64, 256, 1024, 4096], 100_000, 15)
    assert abs(v.mean - 6.0) / 6.0 <= 0.02


@pytest.mark.xfail(strict=True, reason="construction 1 carries the shift bias, construction 2 does not")
def test_constructions_agree_on_half_plane():
    x = [0.0, 3.0]
    v1, _ = vfunc.estimate_v_construction1(HALF_PLANE, GAU2, x, None, [16, 64, 256, 1024, 4096], 100_000, 16)
    v2, _ = vfunc.estimate_v_construction2(HALF_PLANE, GAU2, x, vfunc.Schedule(64, 1 / 3, 2), 100_000, 16)
    assert abs(v1.mean - v2.mean) <= 3 * math.hypot(v1.stderr, v2.stderr)


def test_harmonicity_exact_oracle_is_zero():
    res = vfunc.harmonicity_residual(HALF_LINE, RAD1, [4.0], lambda pts, seed: pts[:, 0], 10, 0)
    assert res.mean == 0.0 and res.stderr == 0.0


def test_harmonicity_detects_wrong_function():
    # u(x) = x_d is not harmonic for the killed Gaussian walk near the boundary: residual = f(z) > 0
    res = vfunc.harmonicity_residual(HALF_PLANE, GAU2, [0.0, 0.5], lambda pts, seed: pts[:, -1], 200_000, 0,
                                     n_reference=2)
    assert res.covers(float(vfunc.gaussian_halfspace_f(0.5)), z=4)
    assert res.mean > 10 * res.stderr


def test_direct_oracle_per_point_streams():
    oracle = vfunc.v_direct_oracle(HALF_LINE, RAD1, 64, 2000)
    pts = np.array([[3.0], [3.0], [5.0]])
    vals = oracle(pts, 1)
    assert vals[0] != vals[1]  # independent streams for repeated points
    np.testing.assert_array_equal(vals, oracle(pts, 1))
    assert oracle.budget == {"n": 64, "n_inner": 2000}
    assert oracle(np.array([[-1.0]]), 1)[0] == 0.0


def test_ratio_decay_slope():
    rows = [{"n": 64}, {"n": 100, "ratio": 1.1}, {"n": 10_000, "ratio": 1.001}]
    assert vfunc.ratio_decay_slope(rows) == pytest.approx(-1.0)
    assert vfunc.ratio_decay_slope(rows[:2]) is None
