import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from riskcurve.laws import (
    Gaussian,
    ProductLaw,
    StdGaussian,
    TrimodalMix,
    law_from_fields,
    law_to_fields,
    mix_cdf,
    mix_quantile,
    phi_map,
    sample,
    sample_array,
    sample_block,
    sample_row,
)

ALL_LAWS = [StdGaussian(), Gaussian(sigma=0.3), TrimodalMix(sigma=0.2, mu=1.0)]


def test_law_validation():
    with pytest.raises(ValueError):
        Gaussian(sigma=0.0)
    with pytest.raises(ValueError):
        Gaussian(sigma=-1.0)
    with pytest.raises(ValueError):
        TrimodalMix(sigma=0.1, mu=0.0)
    with pytest.raises(ValueError):
        TrimodalMix(sigma=math.inf, mu=1.0)
    with pytest.raises(ValueError):
        ProductLaw(())


@pytest.mark.parametrize("law", ALL_LAWS)
def test_sample_mean_zero(law):
    # |mean of N draws| <= 5 * std / sqrt(N) at N = 1e6
    rng = np.random.default_rng(101)
    n = 1_000_000
    draws = sample_array(law, rng, n)
    bound = 5.0 * math.sqrt(law.variance) / math.sqrt(n)
    assert abs(draws.mean()) <= bound


def test_std_gaussian_mean_tight():
    rng = np.random.default_rng(7)
    draws = sample_array(StdGaussian(), rng, 1_000_000)
    assert abs(draws.mean()) <= 4e-3


@pytest.mark.parametrize("mu", [1.0, 2.0])
def test_mixture_second_moment(mu):
    # E[X^2] = 2/3 mu^2 + sigma^2; the mu = 1 case is the 2/3 + sigma^2 form
    sigma = 0.25
    law = TrimodalMix(sigma=sigma, mu=mu)
    rng = np.random.default_rng(11)
    n = 400_000
    sq = sample_array(law, rng, n) ** 2
    target = 2.0 * mu**2 / 3.0 + sigma**2
    stderr = sq.std(ddof=1) / math.sqrt(n)
    assert abs(sq.mean() - target) <= 3.0 * stderr
    assert law.variance == pytest.approx(target)


def test_mixture_mode_mass_quadrature_oracle():
    # P(|X - 1| <= 0.2) for TrimodalMix(0.2, 1); adaptive quadrature of the
    # density over [0.8, 1.2] gives 0.22757372079744376 (abs err < 3e-15)
    expected = 0.22757372079744376
    rng = np.random.default_rng(23)
    n = 500_000
    draws = sample_array(TrimodalMix(sigma=0.2, mu=1.0), rng, n)
    frac = np.mean(np.abs(draws - 1.0) <= 0.2)
    stderr = math.sqrt(expected * (1 - expected) / n)
    assert abs(frac - expected) <= 3.0 * stderr


def test_mix_cdf_center_and_limits():
    for sigma, mu in [(0.2, 1.0), (1.5, 3.0), (0.01, 0.5)]:
        assert mix_cdf(0.0, sigma, mu) == pytest.approx(0.5, abs=1e-15)
        assert mix_cdf(1e6 * (mu + sigma), sigma, mu) == pytest.approx(1.0, abs=1e-15)
        assert mix_cdf(-1e6 * (mu + sigma), sigma, mu) == pytest.approx(0.0, abs=1e-15)


def test_mix_cdf_quadrature_oracle():
    # quadrature of the density over (-inf, 1] gives 0.8331903132179066
    assert mix_cdf(1.0, 0.3, 1.0) == pytest.approx(0.8331903132179066, abs=1e-8)


def test_mix_cdf_monotone_grid():
    grid = np.linspace(-4.0, 4.0, 2001)
    vals = mix_cdf(grid, 0.2, 1.0)
    assert np.all(np.diff(vals) >= 0.0)


@settings(max_examples=60, deadline=None)
@given(
    t1=st.floats(-30, 30),
    t2=st.floats(-30, 30),
    sigma=st.floats(0.05, 3.0),
    mu=st.floats(0.1, 5.0),
)
def test_mix_cdf_monotone_property(t1, t2, sigma, mu):
    lo, hi = min(t1, t2), max(t1, t2)
    a, b = mix_cdf(lo, sigma, mu), mix_cdf(hi, sigma, mu)
    assert 0.0 <= a <= b <= 1.0


def test_mix_quantile_basics():
    assert mix_quantile(0.5, 0.2, 1.0) == 0.0
    with pytest.raises(ValueError):
        mix_quantile(0.0, 0.2, 1.0)
    with pytest.raises(ValueError):
        mix_quantile(1.0, 0.2, 1.0)
    # bisection oracle to 1e-12 gives 1.1048801120503642
    assert mix_quantile(0.9, 0.2, 1.0) == pytest.approx(1.1048801120503642, abs=1e-9)


def test_mix_quantile_inverse_grid():
    for p in np.arange(0.01, 0.995, 0.01):
        q = mix_quantile(float(p), 0.3, 1.0)
        assert abs(mix_cdf(q, 0.3, 1.0) - p) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(0.001, 0.999),
    sigma=st.floats(0.05, 2.0),
    mu=st.floats(0.1, 4.0),
)
def test_mix_quantile_inverse_property(p, sigma, mu):
    q = mix_quantile(p, sigma, mu)
    assert abs(mix_cdf(q, sigma, mu) - p) <= 1e-10


def test_quantile_of_cdf_identity_on_draws():
    rng = np.random.default_rng(3)
    draws = sample_array(TrimodalMix(sigma=0.3, mu=1.0), rng, 200)
    for x in draws:
        p = mix_cdf(float(x), 0.3, 1.0)
        assert abs(mix_quantile(p, 0.3, 1.0) - x) <= 1e-9 * max(1.0, abs(x))


def test_phi_map_zero_and_monotone():
    assert phi_map(0.0, 0.2, 1.0) == 0.0
    grid = np.linspace(-6.0, 6.0, 10_000)
    vals = phi_map(grid, 0.25, 1.0)
    assert np.all(np.diff(vals) > 0.0)


def test_phi_map_pushforward_matches_direct_sampling():
    # two-sample KS below the 1% critical value on 1e5 draws each
    sigma, mu = 0.3, 1.0
    rng = np.random.default_rng(17)
    n = 100_000
    pushed = phi_map(rng.standard_normal(n), sigma, mu)
    direct = sample_array(TrimodalMix(sigma=sigma, mu=mu), rng, n)
    stat = ks_2samp(pushed, direct).statistic
    critical = 1.628 * math.sqrt(2.0 / n)  # alpha = 0.01
    assert stat < critical


def test_sample_row_basics():
    plaw = ProductLaw((StdGaussian(), Gaussian(0.5), TrimodalMix(0.2, 1.0)))
    r1 = sample_row(plaw, 1, np.random.default_rng(5))
    s1 = sample(plaw.laws[0], np.random.default_rng(5))
    assert r1.shape == (1,) and r1[0] == s1
    with pytest.raises(ValueError):
        sample_row(plaw, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_row(plaw, 0, np.random.default_rng(0))
    a = sample_row(plaw, 3, np.random.default_rng(42))
    b = sample_row(plaw, 3, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_sample_row_coordinate_variances():
    laws = (StdGaussian(), Gaussian(0.5), TrimodalMix(0.2, 1.0))
    plaw = ProductLaw(laws)
    rng = np.random.default_rng(31)
    rows = sample_block(plaw, 3, rng, (100_000,))
    for j, law in enumerate(laws):
        col = rows[:, j]
        sq = col**2
        stderr = sq.std(ddof=1) / math.sqrt(len(col))
        assert abs(sq.mean() - law.variance) <= 3.0 * stderr


def test_sample_block_deterministic():
    plaw = ProductLaw.uniform(TrimodalMix(0.2, 1.0), 4)
    a = sample_block(plaw, 4, np.random.default_rng(9), (50, 3))
    b = sample_block(plaw, 4, np.random.default_rng(9), (50, 3))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("law", ALL_LAWS)
def test_law_field_round_trip(law):
    assert law_from_fields(law_to_fields(law)) == law


def test_law_from_fields_rejects_unknown():
    with pytest.raises(ValueError):
        law_from_fields({"kind": "cauchy"})
