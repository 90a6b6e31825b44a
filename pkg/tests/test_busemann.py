import dataclasses

import numpy as np
import pytest
from scipy import stats as sps

from cornergrowth import busemann as bm
from cornergrowth.errors import DomainError
from cornergrowth.lattice import LatticeRect, sample_bulk
from cornergrowth.rng import Rng
from cornergrowth.shape import gpp


def field(alpha=0.5, horizon=60, window=(4, 4), seed=1):
    return bm.busemann_field(alpha, horizon, LatticeRect(*window), rng=Rng(seed))


def test_horizon_target():
    assert bm.horizon_target(0.5, 400) == (200, 200)
    assert bm.horizon_target(1 / 3, 100) == (80, 20)


def test_recovery_at_origin():
    f = field()
    assert min(f.B1[0, 0], f.B2[0, 0]) == pytest.approx(f.omega[0, 0], abs=1e-12)
    assert f.recovery_deviation() <= 1e-9


def test_field_rejects_oversized_window():
    with pytest.raises(DomainError):
        bm.busemann_field(0.5, 10, LatticeRect(5, 5), rng=Rng(0))
    with pytest.raises(DomainError):
        bm.busemann_field(0.5, 10, LatticeRect(1, 1))


def test_between_is_additive():
    f = field(window=(5, 5))
    assert f.between((0, 0), (3, 2)) == pytest.approx(f.between((0, 0), (1, 1)) + f.between((1, 1), (3, 2)))


def test_b1_mean_and_ks_at_half():
    s = bm.busemann_samples(0.5, 400, LatticeRect(1, 1), 10000, Rng(3))
    b1 = s.B1[:, 0, 0]
    assert abs(b1.mean() - 2) <= 3 * b1.std(ddof=1) / 100
    assert sps.kstest(b1, "expon", args=(0, 2)).pvalue > 1e-3
    assert s.recovery.max() <= 1e-9


def test_samples_thread_invariant():
    a = bm.busemann_samples(0.3, 80, LatticeRect(2, 2), 200, Rng(4), threads=1)
    b = bm.busemann_samples(0.3, 80, LatticeRect(2, 2), 200, Rng(4), threads=3)
    assert np.array_equal(a.B1, b.B1) and np.array_equal(a.B2, b.B2)


def test_staircase_edges_shape_and_bounds():
    s = bm.busemann_samples(0.5, 40, LatticeRect(3, 3), 10, Rng(5))
    e = bm.staircase_edges(s.B1, s.B2, (0, 3), 3)
    assert e.shape == (10, 6)
    assert np.array_equal(e[:, 0], s.B1[:, 0, 3]) and np.array_equal(e[:, 1], s.B2[:, 1, 2])
    with pytest.raises(DomainError):
        bm.staircase_edges(s.B1, s.B2, (0, 1), 3)


def test_stabilization_single_vertex():
    st = bm.stabilization_horizon(0.5, LatticeRect(0, 0), Rng(6), [50, 100, 200, 400])
    assert st.field.recovery_deviation() <= 1e-9
    if st.stabilized:
        assert st.stable_n in (100, 200, 400)
    with pytest.raises(DomainError):
        bm.stabilization_horizon(0.5, LatticeRect(0, 0), Rng(6), [100, 50])


def test_stabilization_frequency_reported():
    runs = 20
    hits = sum(bm.stabilization_horizon(0.5, LatticeRect(0, 0), Rng(7, k), [50, 100, 200, 400]).stabilized
               for k in range(runs))
    assert 0 <= hits <= runs


def test_shared_coalescence_gives_equal_increments():
    # horizons drawn on one extended field: once stabilized, increments coincide
    st = bm.stabilization_horizon(0.5, LatticeRect(0, 0), Rng(8), [50, 100, 200, 400])
    if st.stabilized:
        w = sample_bulk(LatticeRect(*bm.horizon_target(0.5, 400)), Rng(8))
        f = bm.busemann_field(0.5, st.stable_n, LatticeRect(0, 0), w)
        assert np.array_equal(f.B1, st.field.B1)


def test_monotonicity_example():
    w = sample_bulk(LatticeRect(160, 160), Rng(9))
    lo = bm.busemann_field(0.4, 200, LatticeRect(5, 5), w)
    hi = bm.busemann_field(0.6, 200, LatticeRect(5, 5), w)
    assert bm.monotonicity_check(lo, hi) == 0
    assert bm.monotonicity_check(lo, lo) == 0


def test_monotonicity_detects_corruption():
    w = sample_bulk(LatticeRect(160, 160), Rng(9))
    lo = bm.busemann_field(0.4, 200, LatticeRect(5, 5), w)
    hi = bm.busemann_field(0.6, 200, LatticeRect(5, 5), w)
    bad = dataclasses.replace(lo, B1=lo.B1 + 100.0)
    assert bm.monotonicity_check(bad, hi) > 0
    with pytest.raises(DomainError):
        bm.monotonicity_check(hi, lo)


def test_ne_reconstruction_10x10():
    f = bm.busemann_field(0.5, 300, LatticeRect(10, 10), rng=Rng(10))
    assert bm.ne_reconstruction_check(f) <= 1e-9


def test_ne_reconstruction_1x1_is_recovery():
    f = field(window=(1, 1))
    assert bm.ne_reconstruction_check(f) <= 1e-9


def test_ne_reconstruction_detects_corruption():
    f = field(window=(4, 4))
    B1 = np.array(f.B1)
    B1[1, 4] += 0.5
    assert bm.ne_reconstruction_check(dataclasses.replace(f, B1=B1)) > 0.1


@pytest.mark.parametrize("alpha", [0.5, 1 / 3])
def test_variational_identity(alpha):
    f = bm.busemann_field(alpha, 90, LatticeRect(3, 3), rng=Rng(11))
    pointwise, shape = bm.variational_identity_check(f)
    assert pointwise <= 1e-9 and shape <= 1e-12


def test_variational_hand_value():
    assert gpp((0.8, 0.2)) == pytest.approx(1.8)
    assert 0.8 / (2 / 3) + 0.2 / (1 / 3) == pytest.approx(1.8)


def test_midpoint_endpoint_is_always_hit():
    assert bm.midpoint_hits((6, 6), (6, 6), 50, Rng(12)).all()
    assert bm.midpoint_hits((6, 6), (0, 0), 50, Rng(12)).all()


def test_midpoint_config_validation():
    with pytest.raises(DomainError):
        bm.MidpointConfig([64], 0.5, 10, midpoint_fraction=1.0)
    with pytest.raises(DomainError):
        bm.MidpointConfig([2], 0.5, 10)


def test_midpoint_transpose_symmetry():
    cfg = bm.MidpointConfig([64], 0.5, 2000)
    a = bm.midpoint_experiment(cfg, Rng(13))[0]
    b = bm.midpoint_experiment(cfg, Rng(14), transpose=True)[0]
    assert abs(a.probability - b.probability) <= 2 * np.hypot(a.stderr, b.stderr)


def test_midpoint_decreasing_small():
    cfg = bm.MidpointConfig([16, 64, 256], 0.5, 1500)
    rows = bm.midpoint_experiment(cfg, Rng(15))
    p = [r.probability for r in rows]
    assert p[0] > p[1] > p[2]
