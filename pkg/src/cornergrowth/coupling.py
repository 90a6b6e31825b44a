"""Nested, exit-shift and reflection couplings as exact per-sample identities.

A nested process based at ``b`` inside a process based at ``a`` takes as its
boundary the increments of the outer process along ``b``'s axes.  Its values
are then the outer values shifted by G_{a,b}, and both processes share their
maximizing paths inside the open quadrant of ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rng as _rng
from . import stats
from .errors import DomainError
from .exponents import stationary_samples
from .lattice import WeightField, backtrace_path, forward_values
from .rng import Rng
from .shape import as_rate

TOL = 1e-9


def _vertex(x):
    return int(x[0]), int(x[1])


@dataclass(frozen=True)
class NestedCoupling:
    a: tuple
    b: tuple
    v: tuple
    outer: np.ndarray   # G_{a,x} for x in [a, v], indexed from a
    eta1: np.ndarray    # eta on b's horizontal axis, edges b+(i-1)e1 -> b+ie1
    eta2: np.ndarray    # eta on b's vertical axis
    inner: np.ndarray   # G^{(a)}_{b,x} for x in [b, v], indexed from b

    def boundary_deviation(self) -> float:
        """eta against the outer increments along b's axes (0 by construction)."""
        b = (self.b[0] - self.a[0], self.b[1] - self.a[1])
        G = self.outer
        d1 = np.abs(self.eta1 - np.diff(G[b[0]:, b[1]])) if self.eta1.size else np.zeros(1)
        d2 = np.abs(self.eta2 - np.diff(G[b[0], b[1]:])) if self.eta2.size else np.zeros(1)
        return float(max(d1.max(), d2.max()))


def nest(W_outer: np.ndarray, a, b, v) -> NestedCoupling:
    """Build the outer grid from vertex weights on [a, v] and the nested grid at b."""
    a, b, v = _vertex(a), _vertex(b), _vertex(v)
    if not (a[0] <= b[0] <= v[0] and a[1] <= b[1] <= v[1]):
        raise DomainError(f"need a <= b <= v, got {a}, {b}, {v}")
    if W_outer.shape != (v[0] - a[0] + 1, v[1] - a[1] + 1):
        raise DomainError("weights must cover [a, v]")
    G = forward_values(W_outer)
    bb = (b[0] - a[0], b[1] - a[1])
    eta1 = np.diff(G[bb[0]:, bb[1]])
    eta2 = np.diff(G[bb[0], bb[1]:])
    Wi = np.array(W_outer[bb[0]:, bb[1]:])
    Wi[0, 0] = 0.0
    Wi[1:, 0] = eta1
    Wi[0, 1:] = eta2
    return NestedCoupling(a, b, v, G, eta1, eta2, forward_values(Wi))


def _quadrant_part(path, corner) -> set:
    """Vertices of ``path`` strictly north-east of ``corner``."""
    return {(int(p), int(q)) for p, q in path if p > corner[0] and q > corner[1]}


class NestedResult(NamedTuple):
    deviation: float
    paths_agree: bool
    eta_positive: bool


def nested_identity(a, b, v, w: WeightField, rng: Rng = None) -> NestedResult:
    """|G_{a,v} - (G_{a,b} + G^{(a)}_{b,v})| on the bulk weights of ``w``, plus path agreement.

    ``a``, ``b``, ``v`` are vertices of ``w.rect``; ``rng`` is unused (the
    weights are given) and kept for a uniform experiment signature.
    """
    a, b, v = _vertex(a), _vertex(b), _vertex(v)
    if not all(w.rect.contains(x) for x in (a, b, v)):
        raise DomainError("a, b, v must lie in the weight rectangle")
    W = w.vertex_weights()[a[0]: v[0] + 1, a[1]: v[1] + 1]
    nc = nest(W, a, b, v)
    bb = (b[0] - a[0], b[1] - a[1])
    vv = (v[0] - a[0], v[1] - a[1])
    g_av = nc.outer[vv]
    g_ab = nc.outer[bb]
    inner_v = nc.inner[v[0] - b[0], v[1] - b[1]]
    dev = abs(g_av - (g_ab + inner_v))
    p_out = backtrace_path(nc.outer, vv[0], vv[1])
    p_in = backtrace_path(nc.inner, v[0] - b[0], v[1] - b[1]) + np.array(bb)
    agree = _quadrant_part(p_out, bb) == _quadrant_part(p_in, bb)
    pos = bool(np.all(nc.eta1 > 0) and np.all(nc.eta2 > 0))
    return NestedResult(float(dev), agree, pos)


# ------------------------------------------------------------- exit shift


def _stationary_vertex_weights(m, n, rho, key) -> np.ndarray:
    W = np.empty((m + 1, n + 1))
    _rng.fill_exp_grid(key, _rng.BULK, 0, 0, 1.0, W)
    W[0, 0] = 0.0
    _rng.fill_exp_line(key, _rng.SOUTH, 1, 1.0 - rho, W[1:, 0])
    _rng.fill_exp_line(key, _rng.WEST, 1, rho, W[0, 1:])
    return W


def _exit1(path) -> int:
    return int(path[path[:, 1] == 0, 0].max())


def _exit2(path) -> int:
    return int(path[path[:, 0] == 0, 1].max())


@dataclass(frozen=True)
class ExitShift:
    m: int
    n: int
    k: int
    l: int
    rho: float
    replicates: int
    coupled_violations: int
    eta_nonpositive: int
    p_outer: float
    p_inner: float
    p_value: float

    @property
    def agreement(self) -> float:
        return 1.0 - self.coupled_violations / self.replicates


def exit_shift_check(m: int, n: int, k: int, l: int, rho, replicates: int, rng: Rng,
                     independent_replicates: int = None, threads: int = 1) -> ExitShift:
    """{tau1 >= k+l on [0,(m,n)]} against {inner exit >= l} for the process nested at (k,0).

    The coupled check runs on ``replicates`` samples; the independent
    comparison of P_{0,(m,n)}(tau1 >= k+l) with P_{0,(m-k,n)}(tau1 >= l) uses
    ``independent_replicates`` (default: ``replicates``) fresh samples of each.
    """
    rho = as_rate(rho)
    if not (0 <= k and 1 <= l and k + l <= m) or n < 1:
        raise DomainError("need k >= 0, l >= 1, k+l <= m and n >= 1")
    seed = rng.child("exit-shift", m, n, k, l).seed
    bad = nonpos = 0
    for r in range(replicates):
        W = _stationary_vertex_weights(m, n, rho, _rng.stream_key(seed, r))
        nc = nest(W, (0, 0), (k, 0), (m, n))
        outer = backtrace_path(nc.outer, m, n)
        inner = backtrace_path(nc.inner, m - k, n)
        if (_exit1(outer) >= k + l) != (_exit1(inner) >= l):
            bad += 1
        if not (np.all(nc.eta1 > 0) and np.all(nc.eta2 > 0)):
            nonpos += 1
    R = independent_replicates or replicates
    big = stationary_samples(m, n, rho, R, _rng.derive_seed(seed, "outer"), threads)
    small = stationary_samples(m - k, n, rho, R, _rng.derive_seed(seed, "inner"), threads)
    k1 = int(np.count_nonzero(big.tau1 >= k + l))
    k2 = int(np.count_nonzero(small.tau1 >= l))
    return ExitShift(m, n, k, l, rho, replicates, bad, nonpos, k1 / R, k2 / R,
                     stats.two_proportion_p(k1, R, k2, R))


# ------------------------------------------------------------- reflection


class ReflectionSample(NamedTuple):
    A: bool              # geodesic from a avoids the origin
    B: bool              # geodesic from a' passes through e2
    A_star: bool         # geodesic from a avoids e1
    eta_positive: bool


def reflection_sample(m: int, n: int, m_bar: int, n_bar: int, rho: float, key) -> ReflectionSample:
    """One draw of the three-origin coupling; returns the events A and B.

    Global coordinates run over [m_bar-m, m_bar] x [n-n_bar, n]; arrays are
    offset by (m - m_bar, n_bar - n).  a = (m_bar-m, 0), a' = (0, n-n_bar),
    v = (m_bar, n), and the origin plays the role of the nested corner.
    """
    ox, oy = m - m_bar, n_bar - n
    omega = np.empty((m + 1, n_bar + 1))
    _rng.fill_exp_grid(key, _rng.BULK, 0, 0, 1.0, omega)
    # sigma on the horizontal line y=0 for m_bar-m+1 <= x <= 0, index x+ox-1
    sig_h0 = np.empty(ox)
    _rng.fill_exp_line(key, _rng.SOUTH, 0, 1.0 - rho, sig_h0)
    # sigma on the horizontal axis of a', x = 1..m_bar
    sig_ha = np.empty(m_bar)
    _rng.fill_exp_line(key, _rng.AUX0, 0, 1.0 - rho, sig_ha)
    # sigma on the vertical line x=0 for n-n_bar+1 <= y <= 0, index y+oy-1
    sig_v0 = np.empty(oy)
    _rng.fill_exp_line(key, _rng.WEST, 0, rho, sig_v0)
    # sigma on the vertical axis of a, y = 1..n
    sig_va = np.empty(n)
    _rng.fill_exp_line(key, _rng.AUX1, 0, rho, sig_va)

    # G_a restricted to x <= 0 gives eta on the positive y-axis
    Wa = np.array(omega[: ox + 1, oy: oy + n + 1])
    Wa[0, 0] = 0.0
    Wa[1:, 0] = sig_h0
    Wa[0, 1:] = sig_va
    eta2 = np.diff(forward_values(Wa)[ox, :])
    # G_a' restricted to y <= 0 gives eta on the positive x-axis
    Wb = np.array(omega[ox: ox + m_bar + 1, : oy + 1])
    Wb[0, 0] = 0.0
    Wb[1:, 0] = sig_ha
    Wb[0, 1:] = sig_v0
    eta1 = np.diff(forward_values(Wb)[:, oy])

    # full processes from a and a'
    Ta = np.array(omega[:, oy:])
    Ta[0, 0] = 0.0
    Ta[1: ox + 1, 0] = sig_h0
    Ta[ox + 1:, 0] = eta1
    Ta[0, 1:] = sig_va
    Ga = forward_values(Ta)
    pa = backtrace_path(Ga, m, n)
    A = not np.any((pa[:, 0] == ox) & (pa[:, 1] == 0))
    A_star = not np.any((pa[:, 0] == ox + 1) & (pa[:, 1] == 0))

    Tb = np.array(omega[ox:, :])
    Tb[0, 0] = 0.0
    Tb[1:, 0] = sig_ha
    Tb[0, 1: oy + 1] = sig_v0
    Tb[0, oy + 1:] = eta2
    Gb = forward_values(Tb)
    pb = backtrace_path(Gb, m_bar, n_bar)
    B = bool(np.any((pb[:, 0] == 0) & (pb[:, 1] == oy + 1)))
    return ReflectionSample(bool(A), B, bool(A_star), bool(np.all(eta1 > 0) and np.all(eta2 > 0)))


@dataclass(frozen=True)
class Reflection:
    m: int
    n: int
    m_bar: int
    n_bar: int
    rho: float
    replicates: int
    disagreements: int          # samples with A != B
    star_disagreements: int     # samples with A* != B
    eta_nonpositive: int
    p_A: float
    p_left: float               # P_{0,(m,n)}(tau1 < m - m_bar)
    p_left_star: float          # P_{0,(m,n)}(tau1 <= m - m_bar)
    p_right: float              # P_{0,(m_bar,n_bar)}(tau2 > n_bar - n)
    independent_replicates: int
    p_value: float
    p_value_star: float

    @property
    def agreement(self) -> float:
        return 1.0 - self.disagreements / self.replicates

    @property
    def star_agreement(self) -> float:
        return 1.0 - self.star_disagreements / self.replicates


def reflection_coupling_check(m: int, n: int, m_bar: int, n_bar: int, rho, replicates: int,
                              rng: Rng, independent_replicates: int = None,
                              threads: int = 1) -> Reflection:
    """Three-origin coupling: compares A with B per sample, and the two exit laws independently.

    A geodesic from a can run through the origin and then turn north, which
    puts it in B but not in A.  The event that matches B on every sample is
    A* (the geodesic avoids e1), i.e. tau1 <= m - m_bar; both forms are
    reported.
    """
    rho = as_rate(rho)
    if not (1 <= m_bar < m and 1 <= n < n_bar):
        raise DomainError("need 1 <= m_bar < m and 1 <= n < n_bar")
    seed = rng.child("reflection", m, n, m_bar, n_bar).seed
    bad = bad_star = nonpos = hitsA = 0
    for r in range(replicates):
        s = reflection_sample(m, n, m_bar, n_bar, rho, _rng.stream_key(seed, r))
        bad += s.A != s.B
        bad_star += s.A_star != s.B
        nonpos += not s.eta_positive
        hitsA += s.A
    R = independent_replicates or replicates
    left = stationary_samples(m, n, rho, R, _rng.derive_seed(seed, "left"), threads)
    right = stationary_samples(m_bar, n_bar, rho, R, _rng.derive_seed(seed, "right"), threads)
    k1 = int(np.count_nonzero(left.tau1 < m - m_bar))
    k1s = int(np.count_nonzero(left.tau1 <= m - m_bar))
    k2 = int(np.count_nonzero(right.tau2 > n_bar - n))
    return Reflection(m, n, m_bar, n_bar, rho, replicates, int(bad), int(bad_star), int(nonpos),
                      hitsA / replicates, k1 / R, k1s / R, k2 / R, R,
                      stats.two_proportion_p(k1, R, k2, R), stats.two_proportion_p(k1s, R, k2, R))
