import math

import numpy as np
import pytest

from cornergrowth import stats
from cornergrowth.errors import DomainError
from cornergrowth.rng import Rng


def test_mean_se_and_variance():
    mu, se = stats.mean_se([1.0, 2.0, 3.0, 4.0])
    assert mu == 2.5 and se == pytest.approx(math.sqrt(5 / 3 / 4))
    assert stats.variance([1.0, 2.0, 3.0, 4.0]) == pytest.approx(5 / 3)
    with pytest.raises(DomainError):
        stats.mean_se([1.0])


def test_combined_se():
    assert stats.combined_se(3, 4) == 5


def test_proportion_se():
    p, se = stats.proportion_se([True, False, False, True])
    assert p == 0.5 and se == pytest.approx(0.25)


def test_bootstrap_matches_analytic_se():
    x = Rng(1).exponential(1.0, 4000)
    means, variances = stats.bootstrap_moments(x, seed=3)
    assert means.shape == (1000, 1)
    assert means[:, 0].std(ddof=1) == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=0.1)


def test_bootstrap_joint_rows_and_threads():
    X = np.column_stack([np.arange(50.0), 2 * np.arange(50.0)])
    m1, v1 = stats.bootstrap_moments(X, seed=4, resamples=64, threads=1)
    m2, v2 = stats.bootstrap_moments(X, seed=4, resamples=64, threads=4)
    assert np.array_equal(m1, m2) and np.array_equal(v1, v2)
    assert np.allclose(m1[:, 1], 2 * m1[:, 0])


def test_ols_exact_line():
    f = stats.ols_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert f.slope == pytest.approx(2) and f.intercept == pytest.approx(1)
    assert f.slope_se == pytest.approx(0, abs=1e-12)
    assert f.within(2.05, 0.1) and not f.within(2.2, 0.1)


def test_loglog_power_law():
    N = np.array([256, 512, 1024, 2048])
    f = stats.loglog_fit(N, 3 * N ** (2 / 3))
    assert f.slope == pytest.approx(2 / 3)
    with pytest.raises(DomainError):
        stats.loglog_fit(N, [1, 0, 1, 1])


def test_ols_se_scales_with_noise():
    r = np.random.default_rng(0)
    x = np.linspace(0, 1, 200)
    ses = []
    for reps in (1, 2):
        sl = [stats.ols_fit(x, x + r.normal(0, 1 / math.sqrt(reps), x.size)).slope for _ in range(400)]
        ses.append(np.std(sl))
    assert ses[0] / ses[1] == pytest.approx(math.sqrt(2), rel=0.15)


def test_ks_exp_accepts_and_rejects():
    x = Rng(2).exponential(0.5, 5000)
    assert stats.ks_exp(x, 0.5) > 1e-3
    assert stats.ks_exp(x, 1.0) < 1e-6


def test_two_proportion():
    assert stats.two_proportion_p(50, 100, 50, 100) == 1.0
    assert stats.two_proportion_p(10, 100, 60, 100) < 1e-6
    assert stats.two_proportion_p(0, 10, 0, 10) == 1.0


def test_anderson_normal():
    r = np.random.default_rng(1)
    _, p = stats.anderson_normal_p(r.normal(size=3000))
    assert p > 1e-3
    _, p = stats.anderson_normal_p(r.exponential(size=3000))
    assert p < 1e-6


def test_max_abs_correlation():
    r = np.random.default_rng(2)
    a = r.normal(size=1000)
    X = np.column_stack([a, a + 0.01 * r.normal(size=1000), r.normal(size=1000)])
    assert stats.max_abs_correlation(X) > 0.99


def test_decreasing_within():
    assert stats.decreasing_within([0.5, 0.3, 0.1], [0.01, 0.01, 0.01])
    assert not stats.decreasing_within([0.5, 0.49, 0.1], [0.01, 0.01, 0.01])
