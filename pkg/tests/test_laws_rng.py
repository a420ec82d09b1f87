import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk import rng as crng
from conewalk.laws import IncrementLaw, LawKind

N = 10**6


def test_path_keys_deterministic_and_distinct():
    a = crng.path_keys(7, 0, 0, 1000)
    b = crng.path_keys(7, 0, 0, 1000)
    np.testing.assert_array_equal(a, b)
    assert len(np.unique(a)) == 1000
    c = crng.path_keys(7, 1, 0, 1000)
    assert len(np.intersect1d(a, c)) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 1000), st.integers(0, 10**6), st.integers(1, 50))
def test_keys_are_slices_of_one_stream(seed, stream, i0, count):
    full = crng.path_keys(seed, stream, 0, i0 + count)
    np.testing.assert_array_equal(crng.path_keys(seed, stream, i0, count), full[i0:])


def test_unit_draws_open_interval():
    u = crng.to_unit(crng.draw(crng.path_keys(1, 0, 0, N), 0))
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / N)


@pytest.mark.parametrize("law", [IncrementLaw(LawKind.GAUSSIAN, 1), IncrementLaw(LawKind.GAUSSIAN, 3),
                                 IncrementLaw(LawKind.RADEMACHER, 2), IncrementLaw(LawKind.SPHERE, 3),
                                 IncrementLaw(LawKind.SPHERE, 2), IncrementLaw(LawKind.PARETO, 2, 6.0)])
def test_standardised(law):
    x = law.sample(N, 11, 0)
    d = law.d
    mean_se = 1 / np.sqrt(N)
    assert np.all(np.abs(x.mean(axis=0)) < 4 * mean_se)
    cov = np.cov(x.T).reshape(d, d)
    # stderr of a sample variance: sqrt((m4 - 1) / N)
    m4 = np.mean(x ** 4, axis=0)
    se_var = np.sqrt((m4 - 1) / N)
    assert np.all(np.abs(np.diag(cov) - 1) < 4 * se_var + 4 / N)  # exact-variance laws only see the mean correction
    off = cov[~np.eye(d, dtype=bool)]
    assert np.all(np.abs(off) < 4 * np.sqrt(np.mean((x[:, :1] * x[:, -1:]) ** 2) / N) + 1e-12)


def test_law_structure():
    r = IncrementLaw(LawKind.RADEMACHER, 3).sample(1000, 0)
    assert set(np.unique(r)) == {-1.0, 1.0}
    s = IncrementLaw(LawKind.SPHERE, 3).sample(1000, 0)
    np.testing.assert_allclose(np.linalg.norm(s, axis=1), np.sqrt(3))
    assert IncrementLaw(LawKind.RADEMACHER, 2).lattice
    assert not IncrementLaw(LawKind.GAUSSIAN, 2).lattice
    assert IncrementLaw(LawKind.SPHERE, 2).max_step == pytest.approx(np.sqrt(2))


def test_pareto_moments_and_condition():
    law = IncrementLaw(LawKind.PARETO, 2, 3.5)
    assert law.moment_order == 3.5
    assert law.satisfies_moment_condition(1.0)
    assert not law.satisfies_moment_condition(4.0)
    assert IncrementLaw(LawKind.GAUSSIAN, 2).satisfies_moment_condition(10.0)
    with pytest.raises(ValueError):
        IncrementLaw(LawKind.PARETO, 1, 1.5)


def test_steps_depend_only_on_key_and_counter():
    law = IncrementLaw(LawKind.GAUSSIAN, 2)
    keys = crng.path_keys(3, 0, 0, 10)
    a = law.steps(keys, 5)
    b = law.steps(keys[3:7], 5)
    np.testing.assert_array_equal(a[3:7], b)
    assert not np.array_equal(law.steps(keys, 5), law.steps(keys, 6))


def test_from_config_aliases():
    assert IncrementLaw.from_config("normal", 2).kind is LawKind.GAUSSIAN
    assert IncrementLaw.from_config("pareto", 1, 4).tail_index == 4
    with pytest.raises(ValueError):
        IncrementLaw.from_config("pareto", 1)
    with pytest.raises(ValueError):
        IncrementLaw.from_config("cauchy", 1)
