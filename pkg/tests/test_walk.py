import math

import numpy as np
import pytest
from scipy.stats import binom

from conewalk import walk
from conewalk.cones import Cone
from conewalk.laws import IncrementLaw, LawKind

RAD1 = IncrementLaw(LawKind.RADEMACHER, 1)
RAD2 = IncrementLaw(LawKind.RADEMACHER, 2)
GAU2 = IncrementLaw(LawKind.GAUSSIAN, 2)


def srw_survival(x: int, k: int) -> float:
    """P(x + S_j > 0 for j <= k) = P(-x < S_k <= x) by reflection."""
    return float(binom.cdf(math.floor((k + x) / 2), k, 0.5) - binom.cdf(math.floor((k - x) / 2), k, 0.5))


def brute_survival(x: int, k: int) -> float:
    steps = np.array(np.meshgrid(*[[-1, 1]] * k)).reshape(k, -1).T
    paths = x + np.cumsum(steps, axis=1)
    return float(np.mean(np.all(paths > 0, axis=1)))


@pytest.mark.parametrize("x, k", [(1, 2), (1, 4), (2, 5), (3, 8), (1, 11)])
def test_reflection_oracle_matches_enumeration(x, k):
    assert srw_survival(x, k) == pytest.approx(brute_survival(x, k), abs=1e-15)


def test_small_exact_values():
    assert srw_survival(1, 2) == 0.5
    assert srw_survival(1, 4) == 0.375


@pytest.mark.parametrize("x, k", [(1, 4), (2, 64), (5, 1000)])
def test_half_line_survival_against_oracle(x, k):
    est = walk.survival_estimate(Cone.half_line(), RAD1, [x], k, 200_000, seed=5)
    assert est.covers(srw_survival(x, k), z=4)


def test_orthant_survival_factorises():
    x, k = (2, 3), 100
    exact = srw_survival(2, k) * srw_survival(3, k)
    est = walk.survival_estimate(Cone.orthant(2), RAD2, list(x), k, 200_000, seed=6)
    assert est.covers(exact, z=4)


def test_survival_curve_monotone():
    curve = walk.survival_curve(Cone.wedge(2 * math.pi / 3), GAU2, [0.5, 1.0], [1, 4, 16, 64, 256], 20_000, 3)
    vals = [e.mean for e in curve]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert curve[-1].info["survivors"] == round(vals[-1] * 20_000)


def test_results_do_not_depend_on_threads():
    args = (Cone.half_space(2), GAU2, [0.0, 1.0], [10, 100], 40_000, 9)
    a = walk.survival_curve(*args, threads=1)
    b = walk.survival_curve(*args, threads=4)
    assert [e.mean for e in a] == [e.mean for e in b]


def test_same_seed_same_result_different_seed_differs():
    args = (Cone.half_line(), RAD1, [3], 50, 10_000)
    assert walk.survival_estimate(*args, 1).mean == walk.survival_estimate(*args, 1).mean
    assert walk.survival_estimate(*args, 1).mean != walk.survival_estimate(*args, 2).mean


def test_starting_point_must_be_inside():
    with pytest.raises(ValueError):
        walk.survival_estimate(Cone.half_line(), RAD1, [0.0], 5, 1000, 0)
    with pytest.raises(ValueError):
        walk.survival_estimate(Cone.half_line(), RAD1, [1.0], 5, 10, 0)


@pytest.mark.parametrize("cone, law, x", [(Cone.half_line(), RAD1, [2.0]),
                                          (Cone.wedge(2 * math.pi / 3), GAU2, [0.3, 0.8]),
                                          (Cone.orthant(2), RAD2, [1.0, 2.0])])
def test_audit_path_agrees_with_kernel(cone, law, x):
    for idx in range(20):
        rec = walk.simulate_killed(cone, law, x, 200, 17, index=idx)
        path = walk.audit_path(cone, law, x, 200, 17, index=idx)
        outside = ~cone._contains(path[1:])
        if rec.survived:
            assert not outside.any()
            np.testing.assert_allclose(path[-1], rec.terminal, atol=1e-9)
        else:
            tau = int(np.argmax(outside)) + 1
            assert tau == rec.tau
            np.testing.assert_allclose(path[tau], rec.exit_overshoot, atol=1e-9)
        assert rec.running_max == pytest.approx(np.max(np.linalg.norm(path[: rec.tau + 1], axis=1)), abs=1e-9)


def test_simulate_killed_with_generator():
    rec = walk.simulate_killed(Cone.half_line(), RAD1, [1.0], 10, np.random.default_rng(0))
    assert 1 <= rec.tau <= 10


def test_tau_moment_probe():
    cone = Cone.half_line()
    with pytest.raises(ValueError):
        walk.tau_moment_probe(cone, RAD1, [1], 1.0, 100, 1000, 0)
    est = walk.tau_moment_probe(cone, RAD1, [1], 0.5, 10**4, 20_000, 0)
    assert est.mean > 1
    # P(tau > h) ~ h^{-1/2} makes the censored share of order h^{-1/4}: flagged
    assert "censoring" in est.flags
    est2 = walk.tau_moment_probe(Cone.orthant(2), RAD2, [1, 1], 0.5, 2000, 20_000, 0)
    assert est2.info["censored_share"] < 0.01 and not est2.flags


def test_max_tail_probe():
    pts = walk.max_tail_probe(Cone.half_line(), RAD1, [1], [16, 64, 256], 1.5, 0.2, 20_000, 4)
    assert [p.n for p in pts] == [16, 64, 256]
    assert all(p.tau_mean.mean <= p.n for p in pts)
    assert all(p.truncated.mean >= 0 for p in pts)
    with pytest.raises(ValueError):
        walk.max_tail_probe(Cone.half_line(), IncrementLaw(LawKind.PARETO, 1, 3.0), [1], 16, 4.0, 0.2, 100, 0)


def test_moment_warning():
    with pytest.warns(UserWarning):
        assert not walk.warn_moment_condition(IncrementLaw(LawKind.PARETO, 2, 2.5), 3.0)
    assert walk.warn_moment_condition(GAU2, 3.0)


def test_max_tail_ratio_decreases_on_half_plane():
    pts = walk.max_tail_probe(Cone.half_space(2), GAU2, [0.0, 1.0], [2**8, 2**10, 2**12], 2.0, 0.2, 200_000, 21)
    for a, b in zip(pts, pts[1:]):
        assert b.ratio <= a.ratio + 2 * math.hypot(a.ratio_stderr, b.ratio_stderr)
    assert pts[-1].ratio < pts[0].ratio


def test_max_tail_impossible_event_is_zero():
    # steps of length 1: |x + S(k)| <= 1 + k, below n**(1/2 + eps/2) when eps is large and n small
    pts = walk.max_tail_probe(Cone.half_line(), RAD1, [1], 4, 1.0, 2.0, 5000, 0)
    assert 4 ** 1.5 > 1 + 4
    assert pts[0].truncated.mean == 0.0


def test_max_tail_rejects_empty_sample():
    with pytest.raises(ValueError):
        walk.max_tail_probe(Cone.half_line(), RAD1, [1], 16, 1.0, 0.2, 0, 0)
