"""Estimators, regression and tests used by the experiments.

All reductions run over per-replicate arrays stored in replicate order, so the
results never depend on how the replicates were scheduled.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numba as nb
import numpy as np
from scipy import stats as _st

from . import rng as _rng
from .errors import DomainError
from .parallel import map_replicates

BOOTSTRAP_RESAMPLES = 1000


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise DomainError("need at least two observations")
    mu = math.fsum(x) / n
    var = math.fsum((x - mu) ** 2) / (n - 1)
    return mu, math.sqrt(var / n)


def variance(x) -> float:
    x = np.asarray(x, dtype=float)
    mu = math.fsum(x) / x.size
    return math.fsum((x - mu) ** 2) / (x.size - 1)


def proportion_se(hits) -> tuple[float, float]:
    hits = np.asarray(hits, dtype=bool)
    p = float(hits.mean())
    return p, math.sqrt(p * (1 - p) / hits.size)


def combined_se(*ses) -> float:
    return math.sqrt(math.fsum(s * s for s in ses))


# ------------------------------------------------------------- bootstrap


@nb.njit(cache=True, nogil=True)
def _bootstrap_kernel(start, stop, key, X, means, variances):
    n, k = X.shape
    s = np.empty(k)
    q = np.empty(k)
    for b in range(start, stop):
        s[:] = 0.0
        q[:] = 0.0
        for t in range(n):
            u = _rng.uniform_at(key, 8, b, t)
            idx = min(int(u * n), n - 1)
            for c in range(k):
                v = X[idx, c]
                s[c] += v
                q[c] += v * v
        for c in range(k):
            mu = s[c] / n
            means[b, c] = mu
            variances[b, c] = (q[c] - n * mu * mu) / (n - 1)


def bootstrap_moments(X, seed: int, resamples: int = BOOTSTRAP_RESAMPLES,
                      threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Column means and variances of ``resamples`` bootstrap resamples of the rows of X.

    Every resample uses the same row draws for all columns, so statistics
    combining several columns are resampled jointly.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float).T).T)
    if X.shape[0] < 2:
        raise DomainError("need at least two rows to bootstrap")
    means = np.empty((resamples, X.shape[1]))
    variances = np.empty_like(means)
    key = _rng.stream_key(seed, 0)
    map_replicates(_bootstrap_kernel, resamples, key, X, means, variances,
                   threads=threads, chunk=16)
    return means, variances


# ------------------------------------------------------------ regression


class FitResult(NamedTuple):
    slope: float
    intercept: float
    slope_se: float
    residuals: np.ndarray

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def ols_fit(x, y) -> FitResult:
    """Ordinary least squares y = intercept + slope * x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise DomainError("need at least three matching points for a fit with an SE")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise DomainError("x values are all equal")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    res = y - (intercept + slope * x)
    s2 = float((res**2).sum()) / (x.size - 2)
    return FitResult(slope, intercept, math.sqrt(s2 / sxx), res)


def loglog_fit(N, stat) -> FitResult:
    stat = np.asarray(stat, dtype=float)
    if np.any(stat <= 0):
        raise DomainError("log-log fit needs positive statistics")
    return ols_fit(np.log(np.asarray(N, dtype=float)), np.log(stat))


# ----------------------------------------------------------------- tests


def ks_exp(sample, rate: float) -> float:
    """KS p-value of ``sample`` against Exp(rate)."""
    return float(_st.kstest(np.asarray(sample, dtype=float), "expon", args=(0.0, 1.0 / rate)).pvalue)


def ks_two_sample(a, b) -> float:
    return float(_st.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).pvalue)


def two_proportion_p(k1: int, n1: int, k2: int, n2: int) -> float:
    """Two-sided pooled z-test p-value for equal success probabilities."""
    p = (k1 + k2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    if se == 0:
        return 1.0 if k1 * n2 == k2 * n1 else 0.0
    z = (k1 / n1 - k2 / n2) / se
    return float(math.erfc(abs(z) / math.sqrt(2)))


def anderson_normal_p(x) -> tuple[float, float]:
    """Anderson-Darling statistic and p-value for normality, mean and variance estimated.

    The p-value uses the D'Agostino-Stephens piecewise approximation for the
    small-sample corrected statistic.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 8:
        raise DomainError("need at least 8 observations")
    A2 = float(_st.anderson(x, dist="norm").statistic)
    a = A2 * (1 + 0.75 / n + 2.25 / n**2)
    if a >= 0.6:
        p = math.exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    elif a >= 0.34:
        p = math.exp(0.9177 - 4.279 * a - 1.38 * a * a)
    elif a >= 0.2:
        p = 1 - math.exp(-8.318 + 42.796 * a - 59.938 * a * a)
    else:
        p = 1 - math.exp(-13.436 + 101.14 * a - 223.73 * a * a)
    return A2, min(max(p, 0.0), 1.0)


def max_abs_correlation(X) -> float:
    """Largest |r| between distinct columns of X."""
    C = np.corrcoef(np.asarray(X, dtype=float), rowvar=False)
    k = C.shape[0]
    return float(np.abs(C[~np.eye(k, dtype=bool)]).max())


def decreasing_within(values, ses, k: float = 2.0) -> bool:
    """Each value exceeds the next by more than ``k`` combined SEs."""
    return all(a - b > k * combined_se(sa, sb)
               for a, b, sa, sb in zip(values, values[1:], ses, ses[1:]))
