import math

import numpy as np
import pytest

from cornergrowth import exponents as ex
from cornergrowth import rng as R
from cornergrowth.errors import DomainError
from cornergrowth.lattice import (
    LatticeRect,
    backtrace_path,
    forward_values,
    geodesic_backtrace,
    lpp_forward,
    path_deviation,
)
from cornergrowth.rng import Rng
from cornergrowth.shape import Direction, gpl
from cornergrowth.stationary import sample_boundary

from oracles import VAR_1X1_HALF


def test_stationary_samples_thread_invariant():
    a = ex.stationary_samples(20, 15, 0.4, 300, 9, threads=1)
    b = ex.stationary_samples(20, 15, 0.4, 300, 9, threads=4)
    for x, y in zip(a[4:], b[4:]):
        assert np.array_equal(x, y)


def test_bulk_terminal_matches_full_grid():
    out = ex.bulk_terminal_samples(7, 5, 20, 3)
    for r in range(20):
        W = np.empty((8, 6))
        R.fill_exp_grid(Rng(3, r).key, R.BULK, 0, 0, 1.0, W)
        assert out[r] == pytest.approx(forward_values(W)[7, 5], abs=1e-9)


def test_variance_identity_1x1():
    v = ex.variance_identity_experiment(1, 1, 0.5, 200000, Rng(7))
    assert abs(v.var - VAR_1X1_HALF) <= 3 * v.var_se
    assert v.agree()
    assert all(c.passed for c in v.checks())


def test_variance_identity_validation():
    with pytest.raises(DomainError):
        ex.variance_identity_experiment(0, 3, 0.5, 1000, Rng(0))
    with pytest.raises(DomainError):
        ex.variance_identity_experiment(3, 3, 0.5, 50, Rng(0))


def test_mean_identity_small():
    mu, se, exact = ex.mean_identity(4, 6, 0.3, 20000, Rng(8))
    assert abs(mu - exact) <= 3 * se


def test_scaling_config_validation():
    with pytest.raises(DomainError):
        ex.ScalingConfig(1.0, [256], 10)
    with pytest.raises(DomainError):
        ex.ScalingConfig(0.5, [256, 512, 1024], 10).require_fit_grid()
    with pytest.raises(DomainError):
        ex.ScalingConfig(0.5, [2], 10)
    ex.ScalingConfig(0.5, [64, 128, 256, 1024], 10).require_fit_grid()


def test_chi_and_exit_slopes_small_grid():
    cfg = ex.ScalingConfig(0.5, [64, 128, 256, 1024], 400, seed=2)
    c = ex.chi_fit(cfg)
    e = ex.exit_scaling(cfg, data=list(c.data))
    assert 0.45 < c.fit.slope < 0.9
    assert 0.45 < e.fit.slope < 0.9
    assert e.dichotomy_violations == 0
    assert len(c.rows(cfg)) == 4 + 2


def test_exit_tail_envelope_at_r1():
    cfg = ex.ScalingConfig(0.5, [64, 128, 256, 1024], 400, seed=3)
    e = ex.exit_scaling(cfg)
    assert all(p > 0 for p in e.tails[1.0])
    assert all(p4 <= p1 for p1, p4 in zip(e.tails[1.0], e.tails[4.0]))


def test_path_hit_full_square_always_hit():
    m, n = 16, 16
    miss = ex.square_misses(m, n, 0.5, (8, 8), [8.0], 200, 4)
    assert not miss.any()


def test_path_hit_matches_full_grid_oracle():
    m, n, corner, sides = 12, 10, (4, 3), [2.0, 5.0]
    miss = ex.square_misses(m, n, 0.5, corner, sides, 60, 5)
    for r in range(60):
        w = sample_boundary(LatticeRect(m, n), 0.5, Rng(5, r))
        geo = geodesic_backtrace(lpp_forward(w), w)
        for k, s in enumerate(sides):
            touched = any(corner[0] <= a <= corner[0] + s and corner[1] <= b <= corner[1] + s
                          for a, b in geo.path)
            assert miss[r, k] == (not touched)


def test_path_hit_monotone_in_r():
    p = ex.path_hit_experiment(0.5, 256, 0.5, [0.25, 0.5, 0.75], 0.1, 500, Rng(6))
    misses = [h.miss for h in p.r_rows]
    assert misses[0] >= misses[1] >= misses[2]


def test_path_hit_rejects_oversized_square():
    with pytest.raises(DomainError):
        ex.path_hit_experiment(0.5, 256, 0.5, [4.0], 0.1, 10, Rng(0))


def test_offchar_target_and_linearity():
    with pytest.raises(DomainError):
        ex.offchar_clt(0.5, 256, 0.6, 1.0, 100, Rng(0))
    a = ex.offchar_clt(0.5, 256, 0.9, 1.0, 200, Rng(1))
    b = ex.offchar_clt(0.5, 256, 0.9, 2.0, 200, Rng(1))
    assert a.target == pytest.approx(4.0) and b.target == pytest.approx(8.0)


def test_offchar_clt_moderate():
    o = ex.offchar_clt(0.5, 1024, 0.9, 1.0, 3000, Rng(2))
    assert o.relative_error <= 0.2
    assert o.normal_p > 1e-3


def test_tail_probe_sanity():
    t = ex.tail_probe(0.5, 256, [0.0, 0.5, 1.0], [0.5, 1.0], 4000, Rng(3))
    assert 0.2 < t.right[0] < 0.8
    assert t.right[0] >= t.right[1] >= t.right[2] > 0
    assert t.left[0] >= t.left[1] > 0


def test_shape_convergence_diagonal():
    rows = ex.shape_convergence([Direction(0.5, 0.5)], [100, 400], 60, Rng(4))
    assert rows[0].limit == pytest.approx(2.0)
    assert rows[1].error < rows[0].error
    assert 1.8 < rows[1].mean <= 2.0 + 3 * rows[1].stderr


def test_shape_convergence_rejects_axis():
    with pytest.raises(DomainError):
        ex.shape_convergence([Direction(1, 0)], [10], 5, Rng(0))


def test_shape_inclusion_large_enough():
    assert ex.shape_inclusion(600, 400, 0.2, Rng(5)) == (0, 0)
    with pytest.raises(DomainError):
        ex.shape_inclusion(100, 100, 0.1, Rng(5))


def _brute_p2l(seed, r, nn, h1, h2):
    W = np.empty((nn + 1, nn + 1))
    R.fill_exp_grid(Rng(seed, r).key, R.BULK, 0, 0, 1.0, W)
    G = forward_values(W)
    return max(G[i, nn - i] + h1 * i + h2 * (nn - i) for i in range(nn + 1))


@pytest.mark.parametrize("h", [(0.0, 0.0), (1.0, -0.5), (-10.0, -10.0)])
def test_point_to_line_matches_oracle(h):
    out = ex.point_to_line_samples(h, 9, 15, 11)
    for r in range(15):
        assert out[r] == pytest.approx(_brute_p2l(11, r, 9, *h), abs=1e-9)


def test_point_to_line_targets():
    rows = ex.p2l_convergence((0.0, 0.0), [100, 400], 60, Rng(6))
    assert rows[0].limit == pytest.approx(2.0) and rows[1].error < 0.1
    assert gpl((1, 1)) == 3.0


def test_deviation_matches_path_deviation():
    D = ex.deviation_samples(20, 5, 12)
    for r in range(5):
        W = np.empty((21, 21))
        R.fill_exp_grid(Rng(12, r).key, R.BULK, 0, 0, 1.0, W)
        assert D[r] == pytest.approx(path_deviation(backtrace_path(forward_values(W), 20, 20)))


def test_straightness_ratio_bounded_and_decreasing():
    rows, fit = ex.straightness_experiment([32, 128, 512], 40, Rng(7))
    assert all(0 <= r.mean_ratio <= 1 for r in rows)
    assert rows[-1].mean_ratio < rows[0].mean_ratio
    assert fit is not None and 0.3 < fit.slope < 1.0
    assert math.isfinite(fit.slope_se)
