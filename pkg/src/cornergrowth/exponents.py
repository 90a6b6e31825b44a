"""Monte Carlo experiments on fluctuation and wandering exponents.

Large rectangles run through rolling one-column DPs with weights generated on
the fly from the counter RNG, so memory is O(n) per replicate and replicate
``r`` always reads stream ``r`` of the experiment seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba as nb
import numpy as np

from . import rng as _rng
from . import stats
from .errors import DomainError
from .lattice import backtrace_path, forward_values, terminal_bulk
from .parallel import map_replicates
from .report import Check, Row
from .rng import Rng
from .shape import Direction, Tilt, as_rate, char_point, gpl, gpp, kappa, mean_stationary
from .stationary import stationary_terminal

SLOPE_TARGET = 2.0 / 3.0
SLOPE_TOL = 0.1
TAIL_R = (1.0, 2.0, 4.0)
MIN_VARIANCE_REPLICATES = 100


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True, nogil=True)
def _stationary_batch(start, stop, seed, m, n, rho, G, T1, T2, S1, S2):
    col = np.empty(n + 1)
    lab = np.empty(n + 1, dtype=np.int64)
    pre = np.empty(n + 1)
    for r in range(start, stop):
        key = _rng.key_of(seed, r)
        g, e1, e2, s1, s2 = stationary_terminal(key, m, n, 1.0 - rho, rho, col, lab, pre)
        G[r] = g
        T1[r] = e1
        T2[r] = e2
        S1[r] = s1
        S2[r] = s2


@nb.njit(cache=True, nogil=True)
def _bulk_batch(start, stop, seed, m, n, out):
    col = np.empty(n + 1)
    for r in range(start, stop):
        out[r] = terminal_bulk(_rng.key_of(seed, r), m, n, col)


@nb.njit(cache=True, nogil=True)
def _square_bits(i, j, x1, x2, sides):
    bits = 0
    if i >= x1 and j >= x2:
        for k in range(sides.shape[0]):
            if i <= x1 + sides[k] and j <= x2 + sides[k]:
                bits |= 1 << k
    return bits


@nb.njit(cache=True, nogil=True)
def _hit_batch(start, stop, seed, m, n, rho, x1, x2, sides, hits):
    """Stationary rolling DP carrying, per cell, the set of squares its geodesic touched."""
    col = np.empty(n + 1)
    flag = np.empty(n + 1, dtype=np.int64)
    for r in range(start, stop):
        key = _rng.key_of(seed, r)
        col[0] = 0.0
        flag[0] = _square_bits(0, 0, x1, x2, sides)
        for j in range(1, n + 1):
            col[j] = col[j - 1] + _rng.exp_at(key, 2, j, 0, rho)
            flag[j] = flag[j - 1] | _square_bits(0, j, x1, x2, sides)
        for i in range(1, m + 1):
            col[0] += _rng.exp_at(key, 1, i, 0, 1.0 - rho)
            flag[0] = flag[0] | _square_bits(i, 0, x1, x2, sides)
            for j in range(1, n + 1):
                a = col[j]
                b = col[j - 1]
                w = _rng.exp_at(key, 0, i, j, 1.0)
                if a > b:
                    col[j] = w + a
                    f = flag[j]
                else:
                    col[j] = w + b
                    f = flag[j - 1]
                flag[j] = f | _square_bits(i, j, x1, x2, sides)
        for k in range(sides.shape[0]):
            hits[r, k] = (flag[n] >> k) & 1


@nb.njit(cache=True, nogil=True)
def _p2l_batch(start, stop, seed, nn, h1, h2, out):
    col = np.empty(nn + 1)
    for r in range(start, stop):
        key = _rng.key_of(seed, r)
        col[0] = _rng.exp_at(key, 0, 0, 0, 1.0)
        for j in range(1, nn + 1):
            col[j] = col[j - 1] + _rng.exp_at(key, 0, 0, j, 1.0)
        best = col[nn] + h2 * nn
        for i in range(1, nn + 1):
            col[0] += _rng.exp_at(key, 0, i, 0, 1.0)
            for j in range(1, nn - i + 1):
                a = col[j]
                b = col[j - 1]
                col[j] = _rng.exp_at(key, 0, i, j, 1.0) + (a if a > b else b)
            v = col[nn - i] + h1 * i + h2 * (nn - i)
            if v > best:
                best = v
        out[r] = best


@nb.njit(cache=True, nogil=True)
def _deviation(path):
    L = path.shape[0] - 1
    x1, x2 = path[0, 0], path[0, 1]
    y1, y2 = path[L, 0], path[L, 1]
    d = 0.0
    for k in range(L + 1):
        l1 = ((L - k) * x1 + k * y1) / L
        l2 = ((L - k) * x2 + k * y2) / L
        v = abs(path[k, 0] - l1) + abs(path[k, 1] - l2)
        if v > d:
            d = v
    return d


@nb.njit(cache=True, nogil=True)
def _straightness_batch(start, stop, seed, N, out):
    W = np.empty((N + 1, N + 1))
    for r in range(start, stop):
        _rng.fill_exp_grid(_rng.key_of(seed, r), 0, 0, 0, 1.0, W)
        G = forward_values(W)
        out[r] = _deviation(backtrace_path(G, N, N))


# ------------------------------------------------------------ sampling API


class StationarySample(NamedTuple):
    m: int
    n: int
    rho: float
    seed: int
    G: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    S1: np.ndarray
    S2: np.ndarray


def stationary_samples(m: int, n: int, rho, replicates: int, seed: int,
                       threads: int = 1) -> StationarySample:
    """Terminal value, exit points and boundary sums of G^rho_{0,(m,n)}, one row per replicate."""
    rho = as_rate(rho)
    if m < 0 or n < 0 or m + n == 0:
        raise DomainError("rectangle must contain a step")
    G = np.empty(replicates)
    S1 = np.empty(replicates)
    S2 = np.empty(replicates)
    T1 = np.empty(replicates, dtype=np.int64)
    T2 = np.empty(replicates, dtype=np.int64)
    map_replicates(_stationary_batch, replicates, np.uint64(seed), m, n, rho, G, T1, T2, S1, S2,
                   threads=threads)
    return StationarySample(m, n, rho, seed, G, T1, T2, S1, S2)


def bulk_terminal_samples(m: int, n: int, replicates: int, seed: int, threads: int = 1) -> np.ndarray:
    out = np.empty(replicates)
    map_replicates(_bulk_batch, replicates, np.uint64(seed), m, n, out, threads=threads)
    return out


def exit_dichotomy_violations(s: StationarySample) -> int:
    """Replicates where not exactly one of tau1, tau2 is positive."""
    return int(np.count_nonzero((s.tau1 > 0) == (s.tau2 > 0)))


# ------------------------------------------------------ variance identity


@dataclass(frozen=True)
class VarianceIdentity:
    m: int
    n: int
    rho: float
    replicates: int
    seed: int
    var: float
    var_se: float
    rhs1: float
    rhs1_se: float
    rhs2: float
    rhs2_se: float
    mean: float
    mean_se: float
    mean_target: float

    def agree(self, k: float = 3.0) -> bool:
        pairs = [(self.var, self.var_se, self.rhs1, self.rhs1_se),
                 (self.var, self.var_se, self.rhs2, self.rhs2_se),
                 (self.rhs1, self.rhs1_se, self.rhs2, self.rhs2_se)]
        return all(abs(a - b) <= k * stats.combined_se(sa, sb) for a, sa, b, sb in pairs)

    def checks(self) -> list:
        mean_ok = abs(self.mean - self.mean_target) <= 3 * self.mean_se
        return [
            Check("variance_identity_agreement", self.agree(), max(
                abs(self.var - self.rhs1), abs(self.var - self.rhs2), abs(self.rhs1 - self.rhs2)),
                "within 3 combined SE"),
            Check("mean_identity", mean_ok, abs(self.mean - self.mean_target), "within 3 SE"),
        ]

    def rows(self) -> list:
        kw = dict(experiment="variance-identity", rho=self.rho, m=self.m, n=self.n,
                  replicates=self.replicates, seed=self.seed)
        return [
            Row(statistic="var_G", value=self.var, stderr=self.var_se, **kw),
            Row(statistic="rhs_exit1", value=self.rhs1, stderr=self.rhs1_se, **kw),
            Row(statistic="rhs_exit2", value=self.rhs2, stderr=self.rhs2_se, **kw),
            Row(statistic="mean_G", value=self.mean, stderr=self.mean_se, **kw),
            Row(statistic="mean_G_exact", value=self.mean_target, **kw),
        ]


def variance_identity_experiment(m: int, n: int, rho, replicates: int, rng: Rng,
                                 threads: int = 1) -> VarianceIdentity:
    """Empirical Var[G^rho] against the two exit-sum expressions for it."""
    rho = as_rate(rho)
    if m < 1 or n < 1:
        raise DomainError("variance identity needs m, n >= 1")
    if replicates < MIN_VARIANCE_REPLICATES:
        raise DomainError(f"need at least {MIN_VARIANCE_REPLICATES} replicates for bootstrap SEs")
    seed = rng.child("variance-identity", m, n).seed
    s = stationary_samples(m, n, rho, replicates, seed, threads)
    a, b = m / (1 - rho) ** 2, n / rho**2
    means, variances = stats.bootstrap_moments(np.column_stack([s.G, s.S1, s.S2]),
                                               _rng.derive_seed(seed, "bootstrap"), threads=threads)
    boot_var = variances[:, 0]
    boot_r1 = -a + b + 2 / (1 - rho) * means[:, 1]
    boot_r2 = a - b + 2 / rho * means[:, 2]
    mu, mu_se = stats.mean_se(s.G)
    return VarianceIdentity(
        m, n, rho, replicates, seed,
        stats.variance(s.G), float(boot_var.std(ddof=1)),
        -a + b + 2 / (1 - rho) * stats.mean_se(s.S1)[0], float(boot_r1.std(ddof=1)),
        a - b + 2 / rho * stats.mean_se(s.S2)[0], float(boot_r2.std(ddof=1)),
        mu, mu_se, mean_stationary(m, n, rho),
    )


def mean_identity(m: int, n: int, rho, replicates: int, rng: Rng, threads: int = 1):
    """(empirical mean, SE, exact mean) of G^rho_{0,(m,n)}."""
    seed = rng.child("mean-identity", m, n).seed
    s = stationary_samples(m, n, rho, replicates, seed, threads)
    mu, se = stats.mean_se(s.G)
    return mu, se, mean_stationary(m, n, rho)


# --------------------------------------------------------- scaling sweeps


@dataclass(frozen=True)
class ScalingConfig:
    rho: float
    N_list: tuple
    replicates: int
    a0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rho", as_rate(self.rho))
        object.__setattr__(self, "N_list", tuple(int(N) for N in self.N_list))
        if self.replicates < 2:
            raise DomainError("replicates must be at least 2")
        for N in self.N_list:
            m, n = char_point(N, self.rho)
            if m < 1 or n < 1:
                raise DomainError(f"N={N} gives a degenerate characteristic point {(m, n)}")
            if kappa(m, n, N, self.rho) > self.a0 * N ** (2 / 3):
                raise DomainError(f"kappa at N={N} exceeds a0*N^(2/3)")

    def require_fit_grid(self):
        Ns = sorted(self.N_list)
        if len(Ns) < 4 or Ns[-1] < 16 * Ns[0]:
            raise DomainError("fits need at least 4 scales spanning a factor of 16")


class ScaleData(NamedTuple):
    N: int
    m: int
    n: int
    kappa: float
    sample: StationarySample


def scaling_sweep(cfg: ScalingConfig, threads: int = 1) -> list[ScaleData]:
    out = []
    for N in cfg.N_list:
        m, n = char_point(N, cfg.rho)
        seed = _rng.derive_seed(cfg.seed, "scaling", N)
        s = stationary_samples(m, n, cfg.rho, cfg.replicates, seed, threads)
        out.append(ScaleData(N, m, n, kappa(m, n, N, cfg.rho), s))
    return out


@dataclass(frozen=True)
class ChiFit:
    fit: stats.FitResult
    N: tuple
    var: tuple
    var_se: tuple
    data: tuple

    def checks(self) -> list:
        return [Check("chi_slope", self.fit.within(SLOPE_TARGET, SLOPE_TOL), self.fit.slope,
                      f"2/3 +- {SLOPE_TOL}")]

    def rows(self, cfg: ScalingConfig) -> list:
        rows = []
        for d, v, se in zip(self.data, self.var, self.var_se):
            rows.append(Row("chi-fit", "var_G", v, se, cfg.rho, d.N, d.m, d.n, d.kappa,
                            cfg.replicates, d.sample.seed))
        rows.append(Row("chi-fit", "slope", self.fit.slope, self.fit.slope_se, cfg.rho,
                        replicates=cfg.replicates, seed=cfg.seed))
        rows.append(Row("chi-fit", "intercept", self.fit.intercept, None, cfg.rho,
                        replicates=cfg.replicates, seed=cfg.seed))
        return rows


def chi_fit(cfg: ScalingConfig, threads: int = 1, data: Optional[list] = None) -> ChiFit:
    """log Var[G^rho] against log N at the characteristic points."""
    cfg.require_fit_grid()
    data = scaling_sweep(cfg, threads) if data is None else data
    var, se = [], []
    for d in data:
        _, v = stats.bootstrap_moments(d.sample.G, _rng.derive_seed(d.sample.seed, "bootstrap"),
                                       threads=threads)
        var.append(stats.variance(d.sample.G))
        se.append(float(v[:, 0].std(ddof=1)))
    fit = stats.loglog_fit([d.N for d in data], var)
    return ChiFit(fit, tuple(d.N for d in data), tuple(var), tuple(se), tuple(data))


@dataclass(frozen=True)
class ExitScaling:
    fit: stats.FitResult
    N: tuple
    mean: tuple
    mean_se: tuple
    tails: dict            # r -> tuple of P(tau1 >= r N^(2/3)) per N
    dichotomy_violations: int
    data: tuple

    def tail_checks(self) -> list:
        """Per-N tail shape: strictly decreasing in r, P(4) <= P(1)/4 and P(4) > 0."""
        out = []
        f1, f2, f4 = (self.tails[r] for r in TAIL_R)
        for k, N in enumerate(self.N):
            dec = f1[k] > f2[k] > f4[k]
            out.append(Check(f"tail_decreasing_N{N}", dec, f1[k] - f4[k], "P(1) > P(2) > P(4)"))
            out.append(Check(f"tail_ratio_N{N}", f4[k] <= f1[k] / 4, f4[k], "P(4) <= P(1)/4"))
            out.append(Check(f"tail_positive_r4_N{N}", f4[k] > 0, f4[k], "P(4) > 0"))
        return out

    def checks(self) -> list:
        return [
            Check("exit_slope", self.fit.within(SLOPE_TARGET, SLOPE_TOL), self.fit.slope,
                  f"2/3 +- {SLOPE_TOL}"),
            Check("exit_dichotomy", self.dichotomy_violations == 0, self.dichotomy_violations,
                  "0 violations", exact=True),
            *self.tail_checks(),
        ]

    def rows(self, cfg: ScalingConfig) -> list:
        rows = []
        for k, d in enumerate(self.data):
            kw = dict(rho=cfg.rho, N=d.N, m=d.m, n=d.n, kappa=d.kappa,
                      replicates=cfg.replicates, seed=d.sample.seed)
            rows.append(Row("exit-scaling", "mean_exit", self.mean[k], self.mean_se[k], **kw))
            for r in TAIL_R:
                p = self.tails[r][k]
                rows.append(Row("exit-scaling", f"tail_r{r:g}", p,
                                math.sqrt(p * (1 - p) / cfg.replicates), **kw))
        rows.append(Row("exit-scaling", "slope", self.fit.slope, self.fit.slope_se, cfg.rho,
                        replicates=cfg.replicates, seed=cfg.seed))
        return rows


def exit_scaling(cfg: ScalingConfig, threads: int = 1, data: Optional[list] = None) -> ExitScaling:
    cfg.require_fit_grid()
    data = scaling_sweep(cfg, threads) if data is None else data
    means, ses = [], []
    tails = {r: [] for r in TAIL_R}
    bad = 0
    for d in data:
        s = d.sample
        tau = s.tau1 + s.tau2
        mu, se = stats.mean_se(tau)
        means.append(mu)
        ses.append(se)
        scale = d.N ** (2 / 3)
        for r in TAIL_R:
            tails[r].append(float(np.mean(s.tau1 >= r * scale)))
        bad += exit_dichotomy_violations(s)
    fit = stats.loglog_fit([d.N for d in data], means)
    return ExitScaling(fit, tuple(d.N for d in data), tuple(means), tuple(ses),
                       {r: tuple(v) for r, v in tails.items()}, bad, tuple(data))


# ----------------------------------------------------------------- path hit


class HitRow(NamedTuple):
    label: str
    side: float
    miss: float
    stderr: float


@dataclass(frozen=True)
class PathHit:
    rho: float
    N: int
    m: int
    n: int
    corner: tuple
    replicates: int
    seed: int
    r_rows: tuple
    delta_row: HitRow

    def checks(self) -> list:
        misses = [h.miss for h in self.r_rows]
        mono = all(b <= a for a, b in zip(misses, misses[1:]))
        return [
            Check("miss_nonincreasing_in_r", mono, max(misses) - min(misses), "nonincreasing"),
            Check("small_square_miss", self.delta_row.miss >= 0.05, self.delta_row.miss, ">= 0.05"),
        ]

    def rows(self) -> list:
        kw = dict(rho=self.rho, N=self.N, m=self.m, n=self.n,
                  kappa=kappa(self.m, self.n, self.N, self.rho),
                  replicates=self.replicates, seed=self.seed)
        return [Row("path-hit", f"miss_{h.label}", h.miss, h.stderr, **kw)
                for h in (*self.r_rows, self.delta_row)]


def square_misses(m: int, n: int, rho, corner, sides, replicates: int, seed: int,
                  threads: int = 1) -> np.ndarray:
    """Per replicate and side, whether the stationary geodesic to (m,n) avoids the square."""
    rho = as_rate(rho)
    sides = np.floor(np.asarray(sides, dtype=float) + 1e-9).astype(np.int64)
    if sides.size > 62:
        raise DomainError("at most 62 squares per run")
    hits = np.zeros((replicates, sides.size), dtype=np.int64)
    map_replicates(_hit_batch, replicates, np.uint64(seed), m, n, rho,
                   int(corner[0]), int(corner[1]), sides, hits, threads=threads)
    return hits == 0


def path_hit_experiment(rho, N: int, t_fraction: float, r_list, delta: float, replicates: int,
                        rng: Rng, threads: int = 1) -> PathHit:
    rho = as_rate(rho)
    if not 0 < t_fraction < 1:
        raise DomainError("t_fraction must lie in (0, 1)")
    if N * (1 - t_fraction) < 1:
        raise DomainError("N(1 - t) must be at least 1")
    m, n = char_point(N, rho)
    corner = (int(math.floor(t_fraction * m)), int(math.floor(t_fraction * n)))
    scale = N ** (2 / 3)
    r_list = sorted(float(r) for r in r_list)
    sides = [r * scale for r in r_list] + [delta * scale]
    for s in sides:
        if s <= 0:
            raise DomainError("square sides must be positive")
        if corner[0] + s > m + 1e-9 or corner[1] + s > n + 1e-9:
            raise DomainError(f"square of side {s:.3f} at {corner} leaves [0, {(m, n)}]")
    seed = rng.child("path-hit", N).seed
    miss = square_misses(m, n, rho, corner, sides, replicates, seed, threads)
    rows = []
    for k, s in enumerate(sides):
        p, se = stats.proportion_se(miss[:, k])
        label = f"r{r_list[k]:g}" if k < len(r_list) else f"delta{delta:g}"
        rows.append(HitRow(label, s, p, se))
    return PathHit(rho, N, m, n, corner, replicates, seed, tuple(rows[:-1]), rows[-1])


# ------------------------------------------------------------ CLT and tails


@dataclass(frozen=True)
class OffCharCLT:
    rho: float
    N: int
    m: int
    n: int
    alpha_exponent: float
    c1: float
    replicates: int
    seed: int
    variance: float
    variance_se: float
    target: float
    ad_statistic: float
    normal_p: float

    @property
    def relative_error(self) -> float:
        return abs(self.variance - self.target) / self.target

    def checks(self) -> list:
        return [Check("clt_variance", self.relative_error <= 0.15, self.relative_error, "<= 15%"),
                Check("clt_normality", self.normal_p > 0.001, self.normal_p, "AD p > 0.001")]

    def rows(self) -> list:
        kw = dict(rho=self.rho, N=self.N, m=self.m, n=self.n,
                  kappa=kappa(self.m, self.n, self.N, self.rho),
                  replicates=self.replicates, seed=self.seed)
        return [Row("offchar-clt", "scaled_variance", self.variance, self.variance_se, **kw),
                Row("offchar-clt", "target_variance", self.target, **kw),
                Row("offchar-clt", "anderson_darling", self.ad_statistic, **kw),
                Row("offchar-clt", "normal_p", self.normal_p, **kw)]


def offchar_clt(rho, N: int, alpha_exponent: float, c1: float, replicates: int, rng: Rng,
                threads: int = 1) -> OffCharCLT:
    """Gaussian fluctuations of G^rho when the endpoint is pushed off the characteristic ray."""
    rho = as_rate(rho)
    if not alpha_exponent > 2 / 3:
        raise DomainError("alpha_exponent must exceed 2/3")
    if c1 <= 0:
        raise DomainError("c1 must be positive")
    m = int(math.floor(N * (1 - rho) ** 2 + c1 * N**alpha_exponent))
    n = int(math.floor(N * rho**2))
    seed = rng.child("offchar-clt", N).seed
    s = stationary_samples(m, n, rho, replicates, seed, threads)
    z = (s.G - mean_stationary(m, n, rho)) / N ** (alpha_exponent / 2)
    _, v = stats.bootstrap_moments(z, _rng.derive_seed(seed, "bootstrap"), threads=threads)
    A2, p = stats.anderson_normal_p(z)
    return OffCharCLT(rho, N, m, n, alpha_exponent, c1, replicates, seed,
                      stats.variance(z), float(v[:, 0].std(ddof=1)), c1 / (1 - rho) ** 2, A2, p)


@dataclass(frozen=True)
class TailProbe:
    rho: float
    N: int
    m: int
    n: int
    replicates: int
    seed: int
    s_list: tuple
    right: tuple
    t_list: tuple
    left: tuple

    def checks(self) -> list:
        pos = all(p > 0 for p in self.right + self.left)
        dec = all(b < a for a, b in zip(self.right, self.right[1:]))
        return [Check("tails_positive", pos, min(self.right + self.left), "> 0"),
                Check("right_tail_decreasing", dec, self.right[-1], "strictly decreasing in s")]

    def rows(self) -> list:
        kw = dict(rho=self.rho, N=self.N, m=self.m, n=self.n,
                  kappa=kappa(self.m, self.n, self.N, self.rho),
                  replicates=self.replicates, seed=self.seed)
        se = lambda p: math.sqrt(p * (1 - p) / self.replicates)  # noqa: E731
        return ([Row("tails", f"right_s{s:g}", p, se(p), **kw) for s, p in zip(self.s_list, self.right)]
                + [Row("tails", f"left_t{t:g}", p, se(p), **kw) for t, p in zip(self.t_list, self.left)])


def tail_probe(rho, N: int, s_list, t_list, replicates: int, rng: Rng, threads: int = 1) -> TailProbe:
    rho = as_rate(rho)
    m, n = char_point(N, rho)
    seed = rng.child("tails", N).seed
    s = stationary_samples(m, n, rho, replicates, seed, threads)
    dev = (s.G - mean_stationary(m, n, rho)) / N ** (1 / 3)
    s_list = tuple(sorted(float(x) for x in s_list))
    t_list = tuple(sorted(float(x) for x in t_list))
    right = tuple(float(np.mean(dev >= x)) for x in s_list)
    left = tuple(float(np.mean(dev <= -x)) for x in t_list)
    return TailProbe(rho, N, m, n, replicates, seed, s_list, right, t_list, left)


# -------------------------------------------------------- shape functions


class ShapeRow(NamedTuple):
    direction: Direction
    N: int
    target: tuple
    mean: float
    stderr: float
    limit: float

    @property
    def error(self) -> float:
        return abs(self.mean - self.limit)


def shape_convergence(directions, N_list, replicates: int, rng: Rng, threads: int = 1) -> list[ShapeRow]:
    """Mean of G_{0,floor(N xi)}/N for the bulk model against gpp(xi)."""
    rows = []
    for xi in directions:
        xi = xi if isinstance(xi, Direction) else Direction(*xi)
        if not xi.interior:
            raise DomainError(f"direction {xi} must be interior")
        for N in N_list:
            v = (int(math.floor(N * xi.xi1)), int(math.floor(N * xi.xi2)))
            seed = rng.child("shape", repr((xi.xi1, xi.xi2)), int(N)).seed
            g = bulk_terminal_samples(v[0], v[1], replicates, seed, threads) / N
            mu, se = stats.mean_se(g)
            rows.append(ShapeRow(xi, int(N), v, mu, se, gpp(xi)))
    return rows


def shape_inclusion(N: int, t: float, eps: float, rng: Rng) -> tuple[int, int]:
    """Violations of (1-eps) t D  within {G <= t} within (1+eps) t D on one [0,N]^2 field.

    Returns (points with gpp <= (1-eps)t but G > t, points with G <= t but gpp > (1+eps)t).
    """
    if t * (1 + eps) > N:
        raise DomainError("the outer shape must fit inside the sampled square")
    W = np.empty((N + 1, N + 1))
    _rng.fill_exp_grid(rng.child("shape-inclusion").key, _rng.BULK, 0, 0, 1.0, W)
    G = forward_values(W)
    i, j = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    g = (np.sqrt(i) + np.sqrt(j)) ** 2
    inner = int(np.count_nonzero((g <= (1 - eps) * t) & (G > t)))
    outer = int(np.count_nonzero((G <= t) & (g > (1 + eps) * t)))
    return inner, outer


class P2LRow(NamedTuple):
    h: Tilt
    n: int
    mean: float
    stderr: float
    limit: float

    @property
    def error(self) -> float:
        return abs(self.mean - self.limit)


def point_to_line_samples(h, nn: int, replicates: int, seed: int, threads: int = 1) -> np.ndarray:
    """max over |x|_1 = nn of G_{0,x} + h.x, per replicate."""
    h = h if isinstance(h, Tilt) else Tilt(*h)
    out = np.empty(replicates)
    map_replicates(_p2l_batch, replicates, np.uint64(seed), int(nn), float(h.h1), float(h.h2), out,
                   threads=threads)
    return out


def p2l_convergence(h, n_list, replicates: int, rng: Rng, threads: int = 1) -> list[P2LRow]:
    h = h if isinstance(h, Tilt) else Tilt(*h)
    rows = []
    for nn in n_list:
        seed = rng.child("p2l", repr((h.h1, h.h2)), int(nn)).seed
        g = point_to_line_samples(h, nn, replicates, seed, threads) / nn
        mu, se = stats.mean_se(g)
        rows.append(P2LRow(h, int(nn), mu, se, gpl(h)))
    return rows


# -------------------------------------------------------------- straightness


class StraightRow(NamedTuple):
    N: int
    mean_ratio: float
    stderr: float
    mean_D: float


def deviation_samples(N: int, replicates: int, seed: int, threads: int = 1) -> np.ndarray:
    """Path deviation D of the bulk geodesic from 0 to (N, N), per replicate."""
    if N < 1:
        raise DomainError("N must be positive")
    out = np.empty(replicates)
    map_replicates(_straightness_batch, replicates, np.uint64(seed), int(N), out, threads=threads,
                   chunk=8)
    return out


def straightness_experiment(N_list, replicates: int, rng: Rng, threads: int = 1):
    """Returns (rows, fit of log mean D against log N or None)."""
    rows = []
    for N in N_list:
        D = deviation_samples(int(N), replicates, rng.child("straightness", int(N)).seed, threads)
        mu, se = stats.mean_se(D / (2 * N))
        rows.append(StraightRow(int(N), mu, se, float(D.mean())))
    fit = stats.loglog_fit([r.N for r in rows], [r.mean_D for r in rows]) if len(rows) >= 3 else None
    return rows, fit
