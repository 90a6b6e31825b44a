import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from cornergrowth import rng as R
from cornergrowth.errors import DomainError, ResourceError
from cornergrowth.lattice import (
    LatticeRect,
    WeightField,
    dump,
    forward_values,
    geodesic_backtrace,
    increments_to_target,
    load,
    lpp_backward,
    lpp_forward,
    lpp_through_point,
    path_deviation,
    sample_bulk,
    sample_exp,
)
from cornergrowth.rng import Rng, derive_seed
from cornergrowth.stationary import sample_boundary

from oracles import (
    BULK_2X2,
    BULK_2X2_BACKWARD_10,
    BULK_2X2_G11,
    BULK_2X2_PATH,
    BULK_2X2_THROUGH_10,
    STAT_1X1,
    brute_geodesic,
    brute_lpp,
)


def bulk2():
    return WeightField(LatticeRect(1, 1), BULK_2X2)


def stat1():
    bulk = np.array([[0.0, 0.0], [0.0, STAT_1X1["w11"]]])
    return WeightField(LatticeRect(1, 1), bulk, np.array([STAT_1X1["I"]]), np.array([STAT_1X1["J"]]), 0.5)


# ------------------------------------------------------------------ rng


def test_inverse_cdf_examples():
    assert -math.log(math.exp(-1)) / 1.0 == pytest.approx(1.0)
    assert -math.log(math.exp(-1)) / 2.0 == pytest.approx(0.5)


def test_exponential_mean_rate_half():
    x = Rng(3).exponential(0.5, 10**6)
    assert abs(x.mean() - 2) <= 3 * 2 / 1e3


def test_sample_exp_rejects_bad_rate():
    with pytest.raises(DomainError):
        sample_exp(0.0, Rng(1))


def test_uniform_open_interval():
    r = Rng(11)
    u = np.array([r.uniform() for _ in range(10000)])
    assert u.min() > 0 and u.max() < 1


def test_counter_rng_is_coordinate_addressed():
    key = Rng(5, 2).key
    a = np.empty((4, 4))
    b = np.empty((2, 2))
    R.fill_exp_grid(key, R.BULK, 0, 0, 1.0, a)
    R.fill_exp_grid(key, R.BULK, 2, 2, 1.0, b)
    assert np.array_equal(a[2:, 2:], b)


def test_streams_and_children_differ():
    x = Rng(9, 0).exponential(1.0, 50)
    y = Rng(9, 1).exponential(1.0, 50)
    z = Rng(9).child("a").exponential(1.0, 50)
    assert not np.array_equal(x, y) and not np.array_equal(x, z)
    assert derive_seed(9, "a") != derive_seed(9, "b")
    assert derive_seed(9, "a", 1) == derive_seed(9, "a", 1)


def test_channels_independent_of_each_other():
    key = Rng(0).key
    a = np.array([R.exp_at(key, R.SOUTH, i, 0, 1.0) for i in range(1, 20001)])
    b = np.array([R.exp_at(key, R.WEST, i, 0, 1.0) for i in range(1, 20001)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(20000)
    assert sps.kstest(a, "expon").pvalue > 1e-3


# ------------------------------------------------------------ rectangles


def test_rect_rejects_negative():
    with pytest.raises(DomainError):
        LatticeRect(-1, 2)


def test_rect_over_cap(monkeypatch):
    monkeypatch.setenv("CGM_MEMORY_CAP_MB", "1")
    with pytest.raises(ResourceError, match="cap"):
        LatticeRect(1000, 1000)


def test_single_vertex_field():
    w = sample_bulk(LatticeRect(0, 0), Rng(1))
    assert w.bulk.shape == (1, 1) and w.bulk[0, 0] > 0


def test_fixed_seed_reproduces_field():
    a = sample_bulk(LatticeRect(20, 30), Rng(4))
    b = sample_bulk(LatticeRect(20, 30), Rng(4))
    assert np.array_equal(a.bulk, b.bulk)


def test_larger_rect_extends_smaller():
    a = sample_bulk(LatticeRect(10, 10), Rng(4))
    b = sample_bulk(LatticeRect(20, 15), Rng(4))
    assert np.array_equal(a.bulk, b.bulk[:11, :11])


def test_bulk_mean():
    w = sample_bulk(LatticeRect(200, 200), Rng(8))
    assert abs(w.bulk.mean() - 1) <= 3 / 201


def test_weight_field_validation():
    with pytest.raises(DomainError):
        WeightField(LatticeRect(1, 1), np.ones((3, 3)))
    with pytest.raises(DomainError):
        WeightField(LatticeRect(1, 1), -np.ones((2, 2)))
    with pytest.raises(DomainError):
        WeightField(LatticeRect(1, 1), np.ones((2, 2)), np.ones(1), None)


def test_fields_are_immutable():
    w = sample_bulk(LatticeRect(3, 3), Rng(0))
    with pytest.raises(ValueError):
        w.bulk[0, 0] = 5


# -------------------------------------------------------------------- LPP


def test_bulk_2x2_forward():
    assert lpp_forward(bulk2())[1, 1] == BULK_2X2_G11


def test_stationary_1x1_forward():
    assert lpp_forward(stat1())[1, 1] == STAT_1X1["G"]


def test_forward_dominates_in_neighbors():
    w = sample_bulk(LatticeRect(15, 12), Rng(2))
    G = lpp_forward(w).values
    assert np.all(G[1:, :] >= G[:-1, :]) and np.all(G[:, 1:] >= G[:, :-1])


def test_backward_examples():
    g = lpp_backward(bulk2(), (1, 1))
    assert g[0, 0] == BULK_2X2_G11
    assert g[1, 1] == BULK_2X2[1, 1]
    assert g[1, 0] == BULK_2X2_BACKWARD_10


def test_backward_needs_bulk_mode():
    with pytest.raises(DomainError):
        lpp_backward(stat1(), (1, 1))


def test_forward_backward_duality():
    for k in range(50):
        w = sample_bulk(LatticeRect(20, 20), Rng(100, k))
        assert abs(lpp_backward(w, (20, 20))[0, 0] - lpp_forward(w)[20, 20]) <= 1e-9


def test_backtrace_bulk_example():
    w = bulk2()
    geo = geodesic_backtrace(lpp_forward(w), w)
    assert [tuple(p) for p in geo.path] == BULK_2X2_PATH
    assert geo.weight == BULK_2X2_G11


def test_backtrace_stationary_example():
    w = stat1()
    geo = geodesic_backtrace(lpp_forward(w), w)
    assert geo.exit2 == STAT_1X1["exit2"] and geo.exit1 == 0
    assert geo.boundary_sum2 == STAT_1X1["S2"]


def test_backtrace_single_vertex():
    w = sample_bulk(LatticeRect(0, 0), Rng(0))
    geo = geodesic_backtrace(lpp_forward(w), w)
    assert [tuple(p) for p in geo.path] == [(0, 0)]
    assert geo.exit1 == geo.exit2 == 0


def test_tie_goes_to_e2_neighbor():
    # on a tie the path enters (i,j) from (i,j-1)
    w = WeightField(LatticeRect(1, 1), np.ones((2, 2)))
    geo = geodesic_backtrace(lpp_forward(w), w)
    assert [tuple(p) for p in geo.path] == [(0, 0), (1, 0), (1, 1)]


def test_backtrace_rejects_outside_target():
    w = bulk2()
    with pytest.raises(DomainError):
        geodesic_backtrace(lpp_forward(w), w, (2, 0))


def test_through_point_examples():
    w = bulk2()
    assert lpp_through_point(w, (1, 1), (1, 1)) == BULK_2X2_G11
    assert lpp_through_point(w, (0, 0), (1, 1)) == BULK_2X2_G11
    assert lpp_through_point(w, (1, 0), (1, 1)) == BULK_2X2_THROUGH_10
    with pytest.raises(DomainError):
        lpp_through_point(w, (2, 0), (1, 1))


def test_backward_increments_one_step():
    w = sample_bulk(LatticeRect(5, 4), Rng(3))
    I, J = increments_to_target(w, (5, 4))
    assert I[4, 4] == pytest.approx(w.bulk[4, 4])
    assert J[5, 3] == pytest.approx(w.bulk[5, 3])


def test_backward_increments_recovery():
    w = sample_bulk(LatticeRect(12, 9), Rng(6))
    I, J = increments_to_target(w, (12, 9))
    assert np.abs(np.minimum(I[:, :9], J[:12, :]) - w.bulk[:12, :9]).max() <= 1e-9


def test_path_deviation_examples():
    assert path_deviation([(0, 0), (1, 0), (1, 1)]) == pytest.approx(1.0)
    assert path_deviation([(0, 0), (1, 0)]) == 0.0


@settings(max_examples=50, deadline=None)
@given(steps=st.lists(st.booleans(), min_size=1, max_size=40))
def test_path_deviation_bounded(steps):
    p = [(0, 0)]
    for s in steps:
        x, y = p[-1]
        p.append((x + 1, y) if s else (x, y + 1))
    d = path_deviation(p)
    assert 0 <= d <= len(steps)


# ------------------------------------------------------------ brute force


@pytest.mark.parametrize("m, n", [(m, n) for m in range(5) for n in range(5) if 0 < m + n <= 8])
def test_forward_matches_enumeration(m, n):
    for k in range(20):
        w = sample_bulk(LatticeRect(m, n), Rng(77, 1000 * m + 10 * n + k))
        W = w.vertex_weights()
        assert abs(forward_values(W)[m, n] - brute_lpp(W, m, n)) <= 1e-9


def test_geodesic_is_an_argmax():
    for k in range(30):
        w = sample_bulk(LatticeRect(3, 4), Rng(88, k))
        geo = geodesic_backtrace(lpp_forward(w), w)
        best, arg = brute_geodesic(w.vertex_weights(), 3, 4)
        assert [tuple(p) for p in geo.path] == arg
        assert abs(geo.weight - best) <= 1e-9


def test_stationary_forward_matches_enumeration():
    for k in range(30):
        w = sample_boundary(LatticeRect(3, 3), 0.4, Rng(99, k))
        W = w.vertex_weights()
        assert abs(lpp_forward(w)[3, 3] - brute_lpp(W, 3, 3)) <= 1e-9


# ------------------------------------------------------------------ dumps


def test_dump_round_trip(tmp_path):
    w = sample_boundary(LatticeRect(4, 3), 0.3, Rng(1))
    dump(w, tmp_path / "w.cgml")
    w2 = load(tmp_path / "w.cgml")
    assert np.array_equal(w.bulk, w2.bulk) and np.array_equal(w.south, w2.south)
    assert w2.rho == w.rho
    g = lpp_forward(w)
    dump(g, tmp_path / "g.cgml")
    g2 = load(tmp_path / "g.cgml")
    assert np.array_equal(g.values, g2.values) and g2.mode == "stationary"
