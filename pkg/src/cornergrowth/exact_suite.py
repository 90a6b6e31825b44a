"""Zero-noise identity suite: every check is an exact per-sample statement."""
from __future__ import annotations

import numpy as np

from .busemann import busemann_field, horizon_target, monotonicity_check, ne_reconstruction_check
from .coupling import exit_shift_check, nested_identity, reflection_coupling_check
from .lattice import LatticeRect, increments_to_target, lpp_forward, sample_bulk
from .report import Check
from .rng import Rng
from .stationary import (
    corner_flip,
    ne_grid_of,
    ne_increment_deviation,
    propagate_increments,
    sample_boundary,
    verify_increment_identity,
)

TOL = 1e-9


def _check(name, devs, instances, tol=TOL, violations=None) -> Check:
    worst = float(max(devs)) if len(devs) else 0.0
    bad = int(np.count_nonzero(np.asarray(devs) > tol)) if violations is None else int(violations)
    return Check(name, bad == 0, worst, f"<= {tol:g}, 0 violations", exact=True,
                 detail=f"{instances} instances, {bad} violations")


def corner_flip_checks(instances: int, rng: Rng) -> list[Check]:
    x = rng.child("flip").exponential(1.0, 3 * instances).reshape(instances, 3) * 3
    inv, cons = [], []
    for W, I, J in x:
        W2, I2, J2 = corner_flip(W, I, J)
        back = corner_flip(W2, I2, J2)
        inv.append(max(abs(back[0] - W), abs(back[1] - I), abs(back[2] - J)))
        cons.append(max(abs((I + J2) - (J + I2)), abs(W - min(I2, J2))))
    return [_check("corner_flip_involution", inv, instances),
            _check("corner_flip_conservation", cons, instances)]


def increment_system_checks(instances: int, rng: Rng) -> list[Check]:
    r = rng.child("systems")
    shapes = r.exponential(1.0, 3 * instances)
    rec, add, inc, ne = [], [], [], []
    for k in range(instances):
        m = 1 + int(shapes[3 * k] * 10) % 30
        n = 1 + int(shapes[3 * k + 1] * 10) % 30
        rho = 0.05 + 0.9 * (1 - np.exp(-shapes[3 * k + 2]))
        w = sample_boundary(LatticeRect(m, n), rho, r.jump(k + 1))
        sys = propagate_increments(w)
        rec.append(sys.recovery_deviation())
        add.append(sys.additivity_deviation())
        inc.append(verify_increment_identity(sys, lpp_forward(w)))
        ne.append(ne_increment_deviation(sys, ne_grid_of(sys)))
    return [_check("recovery_stationary", rec, instances),
            _check("square_additivity", add, instances),
            _check("increment_identity", inc, instances),
            _check("ne_increment_identity", ne, instances)]


def finite_horizon_checks(instances: int, rng: Rng) -> list[Check]:
    """Recovery and north/east monotonicity of backward increments on bulk fields."""
    r = rng.child("horizon")
    rec, mono = [], []
    for k in range(instances):
        w = sample_bulk(LatticeRect(16, 16), r.jump(k))
        I0, J0 = increments_to_target(w, (15, 15))
        I1, J1 = increments_to_target(w, (16, 15))  # v + e1
        I2, J2 = increments_to_target(w, (15, 16))  # v + e2
        W = w.vertex_weights()
        rec.append(float(np.abs(np.minimum(I0[:, :15], J0[:15, :]) - W[:15, :15]).max()))
        # I_{x,v+e2} >= I_{x,v} >= I_{x,v+e1};  J_{y,v+e2} <= J_{y,v} <= J_{y,v+e1}
        d = max(
            float(np.maximum(I0 - I2[:, :16], 0).max()),
            float(np.maximum(I1[:15, :] - I0, 0).max()),
            float(np.maximum(J2[:, :15] - J0, 0).max()),
            float(np.maximum(J0 - J1[:16, :], 0).max()),
        )
        mono.append(d)
    return [_check("recovery_finite_horizon", rec, instances),
            _check("increment_monotonicity", mono, instances)]


def busemann_checks(instances: int, rng: Rng) -> list[Check]:
    r = rng.child("busemann")
    rec, ne, bad_mono = [], [], 0
    window = LatticeRect(6, 6)
    for k in range(instances):
        alpha = 0.3 + 0.4 * ((k * 0.618034) % 1.0)
        f = busemann_field(alpha, 60, window, rng=r.jump(k))
        rec.append(f.recovery_deviation())
        ne.append(ne_reconstruction_check(f))
        lam, rho = 0.35 + 0.1 * ((k * 0.414) % 1.0), 0.55 + 0.1 * ((k * 0.732) % 1.0)
        vl, vh = horizon_target(lam, 60), horizon_target(rho, 60)
        w = sample_bulk(LatticeRect(max(vl[0], vh[0]), max(vl[1], vh[1])), r.jump(10**6 + k))
        bad_mono += monotonicity_check(busemann_field(lam, 60, window, w), busemann_field(rho, 60, window, w))
    return [_check("busemann_recovery", rec, instances),
            _check("ne_reconstruction", ne, instances),
            Check("busemann_monotonicity", bad_mono == 0, bad_mono, "0 violations", exact=True,
                  detail=f"{instances} instances, {bad_mono} violating edges")]


def nested_checks(instances: int, rng: Rng) -> list[Check]:
    r = rng.child("nested")
    w = None
    devs, disagree, nonpos = [], 0, 0
    pts = r.exponential(1.0, 6 * instances)
    for k in range(instances):
        if k % 10 == 0:
            w = sample_bulk(LatticeRect(40, 40), r.jump(k))
        u = (pts[6 * k: 6 * k + 6] * 7).astype(int) % 14
        a = (int(u[0]), int(u[1]))
        b = (a[0] + int(u[2]), a[1] + int(u[3]))
        v = (b[0] + int(u[4]), b[1] + int(u[5]))
        res = nested_identity(a, b, v, w)
        devs.append(res.deviation)
        disagree += not res.paths_agree
        nonpos += not res.eta_positive
    return [_check("nested_identity", devs, instances),
            Check("nested_path_restriction", disagree == 0, disagree, "0 violations", exact=True,
                  detail=f"{instances} instances"),
            Check("induced_boundary_positive", nonpos == 0, nonpos, "0 violations", exact=True,
                  detail=f"{instances} instances")]


def coupled_event_checks(instances: int, rng: Rng) -> list[Check]:
    r = rng.child("events")
    es = exit_shift_check(20, 20, 5, 3, 0.5, instances, r, independent_replicates=100)
    es_small = exit_shift_check(6, 4, 1, 1, 0.3, instances, r, independent_replicates=100)
    bad_es = es.coupled_violations + es_small.coupled_violations
    rf = reflection_coupling_check(20, 10, 15, 16, 0.5, instances, r, independent_replicates=100)
    rf_small = reflection_coupling_check(5, 3, 4, 4, 0.5, instances, r, independent_replicates=100)
    bad_rf = rf.disagreements + rf_small.disagreements
    bad_star = rf.star_disagreements + rf_small.star_disagreements
    n = 2 * instances
    return [
        Check("exit_shift_events", bad_es == 0, bad_es, "0 violations", exact=True,
              detail=f"{n} instances"),
        Check("reflection_events_A_eq_B", bad_rf == 0, bad_rf, "0 violations", exact=True,
              detail=f"{n} instances; A = geodesic from a avoids the origin"),
        Check("reflection_events_Astar_eq_B", bad_star == 0, bad_star, "0 violations", exact=True,
              detail=f"{n} instances; A* = geodesic from a avoids e1"),
    ]


def run_exact_suite(seed: int = 1, instances: int = 100) -> list[Check]:
    rng = Rng(seed)
    out = []
    out += corner_flip_checks(max(instances, 100), rng)
    out += increment_system_checks(instances, rng)
    out += finite_horizon_checks(instances, rng)
    out += busemann_checks(instances, rng)
    out += nested_checks(instances, rng)
    out += coupled_event_checks(instances, rng)
    return out
