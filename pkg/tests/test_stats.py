import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.stats import Accumulator, EstimateCI, binomial_stderr, ratio_with_stderr


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=200), st.integers(1, 5))
def test_chunked_merge_equals_direct(values, parts):
    v = np.array(values)[:, None]
    pieces = [p for p in np.array_split(v, parts) if len(p)]
    acc = Accumulator.combine(Accumulator.from_samples(p) for p in pieces)
    assert acc.count == len(v)
    np.testing.assert_allclose(acc.mean, v.mean(axis=0), rtol=1e-9, atol=1e-9)
    if len(v) > 1:
        np.testing.assert_allclose(acc.covariance[0, 0], np.var(v, ddof=1), rtol=1e-6, atol=1e-6)


def test_mean_covariance():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1000, 2))
    x[:, 1] += x[:, 0]
    acc = Accumulator.from_samples(x)
    np.testing.assert_allclose(acc.mean_covariance(), np.cov(x.T) / 1000)
    e = acc.estimate(1, seed=3)
    assert e.n_samples == 1000 and e.seed == 3
    assert e.stderr == pytest.approx(np.std(x[:, 1], ddof=1) / np.sqrt(1000))


def test_estimate_helpers():
    e = EstimateCI(1.0, 0.1, 100, 0, flags=("unstable",))
    assert e.interval(2) == (0.8, 1.2)
    assert e.covers(1.25, z=3) and not e.covers(1.35, z=3)
    assert e.flagged
    assert e.to_dict()["flags"] == ["unstable"] or e.to_dict()["flags"] == ("unstable",)


def test_ratio_delta_method():
    r, se = ratio_with_stderr(6.0, 2.0, 0.04, 0.01, 0.0)
    assert r == 3.0
    assert se == pytest.approx(3.0 * np.sqrt(0.04 / 36 + 0.01 / 4))
    _, se_corr = ratio_with_stderr(6.0, 2.0, 0.04, 0.01, 0.015)
    assert se_corr < se


def test_binomial_stderr():
    assert binomial_stderr(0.5, 100) == pytest.approx(0.05)
    assert binomial_stderr(0.0, 100) == 0.0
