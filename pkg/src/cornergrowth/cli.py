"""Command-line front end.

    cornergrowth run EXPERIMENT [options]
    cornergrowth validate EXPERIMENT [options]

Exit status: 0 success, 1 an exact-identity contract failed, 2 configuration
or resource error.

Report columns (CSV): experiment, rho, N, m, n, kappa, replicates, statistic,
value, stderr, seed.  Contract checks follow as rows whose statistic is
``check:<name>``.  A ``.meta.json`` sidecar holds the resolved configuration,
version and check details; JSON output carries all of it in one document.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import busemann as bm
from . import coupling as cp
from . import exponents as ex
from . import stats
from .errors import DomainError, ResourceError
from .exact_suite import run_exact_suite
from .lattice import LatticeRect, grid_bytes, memory_cap_bytes, sample_bulk
from .report import Check, ExperimentReport, Row, plot_report
from .rng import Rng
from .shape import Direction, as_rate, char_point, kappa, xi_char

EXPERIMENTS = ("shapes", "variance-identity", "chi-fit", "exit-scaling", "path-hit", "offchar-clt",
               "tails", "busemann", "midpoint", "couplings", "invariants", "straightness")

SCALING_N = [256, 512, 1024, 2048, 4096]

DEFAULTS = {
    "shapes": dict(directions=[[1, 1], [0.8, 0.2]], N_list=[250, 500, 1000], replicates=100,
                   h=[0.0, 0.0], n_list=[500, 1000, 2000], inclusion_N=1000, inclusion_eps=0.1),
    "variance-identity": dict(rho=0.5, m=64, n=64, replicates=20000),
    "chi-fit": dict(rho=0.5, N_list=SCALING_N, replicates=2000, a0=1.0),
    "exit-scaling": dict(rho=0.5, N_list=SCALING_N, replicates=2000, a0=1.0),
    "path-hit": dict(rho=0.5, N=1024, t_fraction=0.5, r_list=[0.25, 0.5, 1.0], delta=0.1,
                     replicates=2000),
    "offchar-clt": dict(rho=0.5, N=4096, alpha_exponent=0.9, c1=1.0, replicates=5000),
    "tails": dict(rho=0.5, N=1024, s_list=[0.0, 0.5, 1.0], t_list=[0.5, 1.0], replicates=10000),
    "busemann": dict(alpha_list=[0.3, 0.5, 0.7], horizon=400, window=3, replicates=10000,
                     corr_replicates=None, horizons=[50, 100, 200, 400], stabilization_runs=100),
    "midpoint": dict(rho=0.5, N_list=[64, 256, 1024], replicates=4000, midpoint_fraction=0.5),
    "couplings": dict(rho=0.5, replicates=1000, independent_replicates=10000,
                      exit_shift=[20, 20, 5, 3], reflection=[20, 10, 15, 16], box=40),
    "invariants": dict(instances=100),
    "straightness": dict(N_list=[256, 512, 1024], replicates=300),
}

# options that change how a run executes but never what it reports
EXECUTION_KEYS = ("threads", "out", "format", "plot")


def _floats(s: str) -> list:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list:
    return [int(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cornergrowth", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        s = sub.add_parser(name, help=f"{name} an experiment")
        s.add_argument("name", nargs="?", help="experiment: " + ", ".join(EXPERIMENTS))
        s.add_argument("--experiment", dest="experiment")
        s.add_argument("--config", help="JSON file of parameters; flags override it")
        s.add_argument("--rho", type=float)
        s.add_argument("--alpha", type=float)
        s.add_argument("--alpha-list", dest="alpha_list", type=_floats)
        s.add_argument("--N", type=int)
        s.add_argument("--N-list", dest="N_list", type=_ints)
        s.add_argument("--m", type=int)
        s.add_argument("--n", type=int)
        s.add_argument("--replicates", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--window", type=int)
        s.add_argument("--horizon", type=int)
        s.add_argument("--horizons", type=_ints)
        s.add_argument("--t-fraction", dest="t_fraction", type=float)
        s.add_argument("--midpoint-fraction", dest="midpoint_fraction", type=float)
        s.add_argument("--r-list", dest="r_list", type=_floats)
        s.add_argument("--delta", type=float)
        s.add_argument("--s-list", dest="s_list", type=_floats)
        s.add_argument("--t-list", dest="t_list", type=_floats)
        s.add_argument("--alpha-exponent", dest="alpha_exponent", type=float)
        s.add_argument("--c1", type=float)
        s.add_argument("--instances", type=int)
        s.add_argument("--stabilization-runs", dest="stabilization_runs", type=int)
        s.add_argument("--corr-replicates", dest="corr_replicates", type=int)
        s.add_argument("--independent-replicates", dest="independent_replicates", type=int)
        s.add_argument("--inclusion-N", dest="inclusion_N", type=int)
        s.add_argument("--inclusion-eps", dest="inclusion_eps", type=float)
        s.add_argument("--out")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--plot", action="store_true", default=None,
                       help="also render a PNG next to the report")
    return p


def resolve_config(args) -> dict:
    name = args.experiment or args.name
    if args.experiment and args.name and args.experiment != args.name:
        raise DomainError("experiment given twice with different values")
    filecfg = {}
    if args.config:
        filecfg = json.loads(Path(args.config).read_text())
        name = name or filecfg.get("experiment")
    if name not in EXPERIMENTS:
        raise DomainError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = dict(DEFAULTS[name])
    cfg.update({k: v for k, v in filecfg.items() if k != "experiment"})
    for k, v in vars(args).items():
        if k in ("command", "name", "experiment", "config") or v is None:
            continue
        cfg[k] = v
    if "N" in cfg and "N_list" in DEFAULTS[name] and "N" not in DEFAULTS[name]:
        cfg["N_list"] = [cfg.pop("N")]
    if "alpha" in cfg and "alpha_list" in DEFAULTS[name]:
        cfg["alpha_list"] = [cfg.pop("alpha")]
    cfg.setdefault("seed", 0)
    cfg.setdefault("threads", 1)
    cfg.setdefault("format", "csv")
    cfg.setdefault("plot", False)
    cfg["experiment"] = name
    return cfg


# ------------------------------------------------------------- validation


def _positive(cfg, key):
    if int(cfg[key]) < 1:
        raise DomainError(f"{key} must be positive")


def resident_grids(cfg: dict) -> list:
    """(m, n) of every full grid one replicate holds in memory."""
    name = cfg["experiment"]
    if name == "shapes":
        return [(cfg["inclusion_N"], cfg["inclusion_N"])]
    if name == "busemann":
        return [bm.horizon_target(a, cfg["horizon"]) for a in cfg["alpha_list"]]
    if name == "midpoint":
        xi = xi_char(cfg["rho"])
        return [(math.floor(N * xi.xi1), math.floor(N * xi.xi2)) for N in cfg["N_list"]]
    if name == "straightness":
        return [(N, N) for N in cfg["N_list"]]
    if name == "couplings":
        m, n, mb, nb = cfg["reflection"]
        return [(m, nb), (cfg["box"], cfg["box"])]
    return []


def validate_config(cfg: dict) -> dict:
    """Check every parameter against its module's preconditions; returns diagnostics."""
    name = cfg["experiment"]
    diag = {"experiment": name, "ok": True, "messages": [], "scales": []}
    if cfg.get("threads", 1) < 1:
        raise DomainError("threads must be positive")
    if "replicates" in cfg:
        _positive(cfg, "replicates")
    if "rho" in cfg:
        cfg["rho"] = as_rate(cfg["rho"])
    for a in cfg.get("alpha_list", []):
        as_rate(a)
    if name in ("chi-fit", "exit-scaling"):
        sc = ex.ScalingConfig(cfg["rho"], cfg["N_list"], cfg["replicates"], cfg["a0"], cfg["seed"])
        sc.require_fit_grid()
    if name == "variance-identity":
        if cfg["m"] < 1 or cfg["n"] < 1:
            raise DomainError("m and n must be at least 1")
        if cfg["replicates"] < ex.MIN_VARIANCE_REPLICATES:
            raise DomainError(f"variance identity needs at least {ex.MIN_VARIANCE_REPLICATES} replicates")
    if name == "offchar-clt" and not cfg["alpha_exponent"] > 2 / 3:
        raise DomainError("alpha_exponent must exceed 2/3")
    if name == "midpoint":
        bm.MidpointConfig(cfg["N_list"], cfg["rho"], cfg["replicates"], cfg["midpoint_fraction"])
    if name == "path-hit":
        m, n = char_point(cfg["N"], cfg["rho"])
        c = (math.floor(cfg["t_fraction"] * m), math.floor(cfg["t_fraction"] * n))
        if not 0 < cfg["t_fraction"] < 1:
            raise DomainError("t_fraction must lie in (0, 1)")
        for r in list(cfg["r_list"]) + [cfg["delta"]]:
            s = r * cfg["N"] ** (2 / 3)
            if c[0] + s > m + 1e-9 or c[1] + s > n + 1e-9:
                raise DomainError(f"square of side {s:.2f} at {c} leaves [0, {(m, n)}]")
    if name == "busemann":
        for a in cfg["alpha_list"]:
            v = bm.horizon_target(a, cfg["horizon"])
            if cfg["window"] > min(v) - 1:
                raise DomainError(f"window {cfg['window']} exceeds the horizon grid {v}")
        if cfg["window"] < 3:
            raise DomainError("window must be at least 3 for the 6-edge staircase")
    if name == "couplings":
        m, n, k, l = cfg["exit_shift"]
        if not (0 <= k and 1 <= l and k + l <= m):
            raise DomainError("exit_shift needs k >= 0, l >= 1 and k+l <= m")
        m, n, mb, nb = cfg["reflection"]
        if not (1 <= mb < m and 1 <= n < nb):
            raise DomainError("reflection needs 1 <= m_bar < m and 1 <= n < n_bar")
    for N in cfg.get("N_list", [cfg["N"]] if "N" in cfg else []):
        if "rho" in cfg:
            m, n = char_point(N, cfg["rho"])
            diag["scales"].append({"N": N, "m": m, "n": n, "kappa": kappa(m, n, N, cfg["rho"]),
                                   "rolling_bytes_per_thread": (n + 1) * 8})
    cap = memory_cap_bytes()
    grids = resident_grids(cfg)
    diag["memory_cap_bytes"] = cap
    diag["resident_grids"] = [{"m": m, "n": n, "bytes": grid_bytes(m, n)} for m, n in grids]
    for m, n in grids:
        if grid_bytes(m, n) * cfg.get("threads", 1) > cap:
            diag["ok"] = False
            diag["messages"].append(
                f"a {m}x{n} grid per thread would exceed memory cap ({grid_bytes(m, n)} bytes x "
                f"{cfg.get('threads', 1)} threads > {cap})")
    return diag


# ------------------------------------------------------------ experiments


def _shapes(cfg, rng, threads):
    rows, checks = [], []
    sr = ex.shape_convergence([Direction(*d) for d in cfg["directions"]], cfg["N_list"],
                              cfg["replicates"], rng, threads)
    for d in cfg["directions"]:
        mine = [r for r in sr if (r.direction.xi1, r.direction.xi2) == tuple(d)]
        for r in mine:
            rows.append(Row("shapes", f"mean_G_over_N_xi({d[0]:g},{d[1]:g})", r.mean, r.stderr,
                            N=r.N, m=r.target[0], n=r.target[1], replicates=cfg["replicates"],
                            seed=cfg["seed"]))
            rows.append(Row("shapes", f"shape_error_xi({d[0]:g},{d[1]:g})", r.error, r.stderr,
                            N=r.N, m=r.target[0], n=r.target[1], replicates=cfg["replicates"],
                            seed=cfg["seed"]))
        errs = [r.error for r in mine]
        checks.append(Check(f"shape_error_decreasing_xi({d[0]:g},{d[1]:g})",
                            all(b < a for a, b in zip(errs, errs[1:])), errs[-1], "decreasing in N"))
        checks.append(Check(f"shape_error_budget_xi({d[0]:g},{d[1]:g})",
                            errs[-1] <= 0.05 * mine[-1].limit, errs[-1], "<= 0.05 gpp(xi)"))
    pr = ex.p2l_convergence(tuple(cfg["h"]), cfg["n_list"], cfg["replicates"], rng, threads)
    for r in pr:
        rows.append(Row("shapes", "p2l_mean_over_n", r.mean, r.stderr, N=r.n,
                        replicates=cfg["replicates"], seed=cfg["seed"]))
        rows.append(Row("shapes", "p2l_error", r.error, r.stderr, N=r.n,
                        replicates=cfg["replicates"], seed=cfg["seed"]))
    errs = [r.error for r in pr]
    checks.append(Check("p2l_error_decreasing", all(b < a for a, b in zip(errs, errs[1:])),
                        errs[-1], "decreasing in n"))
    checks.append(Check("p2l_error_budget", errs[-1] <= 0.05 * abs(pr[-1].limit), errs[-1],
                        "<= 0.05 |gpl(h)|"))
    N = cfg["inclusion_N"]
    inner, outer = ex.shape_inclusion(N, 0.8 * N / (1 + cfg["inclusion_eps"]), cfg["inclusion_eps"], rng)
    rows.append(Row("shapes", "inclusion_inner_violations", float(inner), N=N, seed=cfg["seed"]))
    rows.append(Row("shapes", "inclusion_outer_violations", float(outer), N=N, seed=cfg["seed"]))
    checks.append(Check("shape_inclusion", inner + outer == 0, inner + outer, "0 points outside"))
    return rows, checks


def _variance_identity(cfg, rng, threads):
    v = ex.variance_identity_experiment(cfg["m"], cfg["n"], cfg["rho"], cfg["replicates"], rng, threads)
    return v.rows(), v.checks()


def _scaling_cfg(cfg):
    return ex.ScalingConfig(cfg["rho"], cfg["N_list"], cfg["replicates"], cfg["a0"], cfg["seed"])


def _chi_fit(cfg, rng, threads):
    sc = _scaling_cfg(cfg)
    c = ex.chi_fit(sc, threads)
    e = ex.exit_scaling(sc, threads, list(c.data))
    return c.rows(sc), c.checks() + [x for x in e.checks() if x.exact]


def _exit_scaling(cfg, rng, threads):
    sc = _scaling_cfg(cfg)
    e = ex.exit_scaling(sc, threads)
    return e.rows(sc), e.checks()


def _path_hit(cfg, rng, threads):
    p = ex.path_hit_experiment(cfg["rho"], cfg["N"], cfg["t_fraction"], cfg["r_list"], cfg["delta"],
                               cfg["replicates"], rng, threads)
    return p.rows(), p.checks()


def _offchar(cfg, rng, threads):
    o = ex.offchar_clt(cfg["rho"], cfg["N"], cfg["alpha_exponent"], cfg["c1"], cfg["replicates"],
                       rng, threads)
    return o.rows(), o.checks()


def _tails(cfg, rng, threads):
    t = ex.tail_probe(cfg["rho"], cfg["N"], cfg["s_list"], cfg["t_list"], cfg["replicates"], rng, threads)
    return t.rows(), t.checks()


def busemann_marginals(alpha, horizon, window, replicates, corr_replicates=None, rng=None, threads=1):
    """KS p-values of B1(0,0), B2(0,0), staircase correlations and recovery for one alpha."""
    corr_replicates = corr_replicates or replicates
    total = max(replicates, corr_replicates)
    s = bm.busemann_samples(alpha, horizon, LatticeRect(window, window), total,
                            rng.child("busemann", repr(float(alpha))), threads)
    b1 = s.B1[:replicates, 0, 0]
    b2 = s.B2[:replicates, 0, 0]
    edges = bm.staircase_edges(s.B1, s.B2, (0, 3), 3)
    return {
        "alpha": alpha,
        "mean_B1": stats.mean_se(b1),
        "mean_B2": stats.mean_se(b2),
        "ks_B1": stats.ks_exp(b1, 1 - alpha),
        "ks_B2": stats.ks_exp(b2, alpha),
        "corr_small": stats.max_abs_correlation(edges[:replicates]),
        "corr": stats.max_abs_correlation(edges[:corr_replicates]),
        "recovery": float(s.recovery.max()),
    }


def _busemann(cfg, rng, threads):
    rows, checks = [], []
    R = cfg["replicates"]
    RC = cfg["corr_replicates"] or R
    for a in cfg["alpha_list"]:
        res = busemann_marginals(a, cfg["horizon"], cfg["window"], R, RC, rng, threads)
        kw = dict(rho=a, N=cfg["horizon"], seed=cfg["seed"])
        v = bm.horizon_target(a, cfg["horizon"])
        kw.update(m=v[0], n=v[1])
        rows += [Row("busemann", "mean_B1_00", *res["mean_B1"], replicates=R, **kw),
                 Row("busemann", "mean_B2_00", *res["mean_B2"], replicates=R, **kw),
                 Row("busemann", "ks_p_B1_00", res["ks_B1"], replicates=R, **kw),
                 Row("busemann", "ks_p_B2_00", res["ks_B2"], replicates=R, **kw),
                 Row("busemann", "staircase_max_abs_corr", res["corr"], replicates=RC, **kw),
                 Row("busemann", "recovery_max_dev", res["recovery"], replicates=max(R, RC), **kw)]
        if RC != R:
            rows.append(Row("busemann", "staircase_max_abs_corr", res["corr_small"], replicates=R, **kw))
        checks += [Check(f"ks_B1_alpha{a:g}", res["ks_B1"] > 1e-3, res["ks_B1"], "p > 0.001"),
                   Check(f"ks_B2_alpha{a:g}", res["ks_B2"] > 1e-3, res["ks_B2"], "p > 0.001"),
                   Check(f"staircase_corr_alpha{a:g}", res["corr"] < 0.01, res["corr"],
                         f"|r| < 0.01 at {RC} replicates"),
                   Check(f"recovery_alpha{a:g}", res["recovery"] <= 1e-9, res["recovery"], "<= 1e-9",
                         exact=True)]
    # stabilization diagnostic: single-vertex window, one realization per run
    runs, stable = cfg["stabilization_runs"], 0
    a0 = cfg["alpha_list"][len(cfg["alpha_list"]) // 2]
    srng = rng.child("stabilization")
    for k in range(runs):
        st = bm.stabilization_horizon(a0, LatticeRect(0, 0), srng.jump(k), cfg["horizons"])
        stable += st.stabilized
    rows.append(Row("busemann", "stabilization_frequency", stable / runs, rho=a0,
                    N=cfg["horizons"][-1], replicates=runs, seed=cfg["seed"]))
    return rows, checks


def _midpoint(cfg, rng, threads):
    mc = bm.MidpointConfig(cfg["N_list"], cfg["rho"], cfg["replicates"], cfg["midpoint_fraction"])
    res = bm.midpoint_experiment(mc, rng, threads)
    rows = [Row("midpoint", "hit_probability", r.probability, r.stderr, mc.rho, r.N, r.target[0],
                r.target[1], kappa(r.target[0], r.target[1], r.N, mc.rho), r.replicates, cfg["seed"])
            for r in res]
    p = [r.probability for r in res]
    se = [r.stderr for r in res]
    return rows, [Check("midpoint_decreasing", stats.decreasing_within(p, se), p[-1],
                        "each step drops by > 2 combined SE")]


def _couplings(cfg, rng, threads):
    rows, checks = [], []
    rho = cfg["rho"]
    box = cfg["box"]
    w = sample_bulk(LatticeRect(box, box), rng.child("nested-field"))
    pts = rng.child("nested-points").exponential(1.0, 6 * cfg["replicates"])
    devs, disagree = [], 0
    for k in range(cfg["replicates"]):
        u = (pts[6 * k: 6 * k + 6] * box / 6).astype(int) % (box // 3 + 1)
        a = (int(u[0]), int(u[1]))
        b = (a[0] + int(u[2]), a[1] + int(u[3]))
        v = (b[0] + int(u[4]), b[1] + int(u[5]))
        res = cp.nested_identity(a, b, v, w)
        devs.append(res.deviation)
        disagree += not res.paths_agree
    rows.append(Row("couplings", "nested_max_deviation", max(devs), replicates=cfg["replicates"],
                    seed=cfg["seed"]))
    checks.append(Check("nested_identity", max(devs) <= 1e-9, max(devs), "<= 1e-9", exact=True))
    checks.append(Check("nested_path_restriction", disagree == 0, disagree, "0", exact=True))

    m, n, k, l = cfg["exit_shift"]
    es = cp.exit_shift_check(m, n, k, l, rho, cfg["replicates"], rng, cfg["independent_replicates"], threads)
    kw = dict(rho=rho, m=m, n=n, seed=cfg["seed"])
    rows += [Row("couplings", "exit_shift_agreement", es.agreement, replicates=es.replicates, **kw),
             Row("couplings", "exit_shift_P_outer", es.p_outer, replicates=cfg["independent_replicates"], **kw),
             Row("couplings", "exit_shift_P_inner", es.p_inner, replicates=cfg["independent_replicates"], **kw),
             Row("couplings", "exit_shift_p_value", es.p_value, replicates=cfg["independent_replicates"], **kw)]
    checks.append(Check("exit_shift_coupled", es.coupled_violations == 0, es.coupled_violations, "0",
                        exact=True))
    checks.append(Check("exit_shift_independent", es.p_value > 1e-3, es.p_value, "p > 0.001"))

    m, n, mb, nb = cfg["reflection"]
    rf = cp.reflection_coupling_check(m, n, mb, nb, rho, cfg["replicates"], rng,
                                      cfg["independent_replicates"], threads)
    kw = dict(rho=rho, m=m, n=n, seed=cfg["seed"])
    RI = cfg["independent_replicates"]
    rows += [Row("couplings", "reflection_agreement_A_B", rf.agreement, replicates=rf.replicates, **kw),
             Row("couplings", "reflection_agreement_Astar_B", rf.star_agreement, replicates=rf.replicates, **kw),
             Row("couplings", "reflection_P_tau1_lt", rf.p_left, replicates=RI, **kw),
             Row("couplings", "reflection_P_tau1_le", rf.p_left_star, replicates=RI, **kw),
             Row("couplings", "reflection_P_tau2_gt", rf.p_right, replicates=RI, **kw),
             Row("couplings", "reflection_p_value", rf.p_value, replicates=RI, **kw),
             Row("couplings", "reflection_p_value_star", rf.p_value_star, replicates=RI, **kw)]
    checks += [Check("reflection_A_eq_B", rf.disagreements == 0, rf.disagreements, "0", exact=True,
                     detail="A = geodesic from a avoids the origin"),
               Check("reflection_Astar_eq_B", rf.star_disagreements == 0, rf.star_disagreements, "0",
                     exact=True, detail="A* = geodesic from a avoids e1"),
               Check("reflection_independent", rf.p_value > 1e-3, rf.p_value, "p > 0.001",
                     detail="P(tau1 < m - m_bar) vs P(tau2 > n_bar - n)"),
               Check("reflection_independent_star", rf.p_value_star > 1e-3, rf.p_value_star,
                     "p > 0.001", detail="P(tau1 <= m - m_bar) vs P(tau2 > n_bar - n)")]
    return rows, checks


def _invariants(cfg, rng, threads):
    checks = run_exact_suite(cfg["seed"], cfg["instances"])
    rows = [Row("invariants", c.name, float(c.value), replicates=cfg["instances"], seed=cfg["seed"])
            for c in checks]
    return rows, checks


def _straightness(cfg, rng, threads):
    res, fit = ex.straightness_experiment(cfg["N_list"], cfg["replicates"], rng, threads)
    rows = [Row("straightness", "mean_D_over_2N", r.mean_ratio, r.stderr, N=r.N, m=r.N, n=r.N,
                replicates=cfg["replicates"], seed=cfg["seed"]) for r in res]
    if fit is not None:
        rows.append(Row("straightness", "D_slope", fit.slope, fit.slope_se,
                        replicates=cfg["replicates"], seed=cfg["seed"]))
    ratios = [r.mean_ratio for r in res]
    ses = [r.stderr for r in res]
    dec = ratios[-1] < ratios[0] and ratios[0] - ratios[-1] > 2 * stats.combined_se(ses[0], ses[-1])
    return rows, [Check("straightness_decreasing", dec, ratios[-1], "first > last by 2 combined SE")]


RUNNERS = {
    "shapes": _shapes, "variance-identity": _variance_identity, "chi-fit": _chi_fit,
    "exit-scaling": _exit_scaling, "path-hit": _path_hit, "offchar-clt": _offchar, "tails": _tails,
    "busemann": _busemann, "midpoint": _midpoint, "couplings": _couplings,
    "invariants": _invariants, "straightness": _straightness,
}


def run_experiment(cfg: dict) -> ExperimentReport:
    validate_config(cfg)
    for m, n in resident_grids(cfg):
        LatticeRect(m, n)  # raises ResourceError over the cap
    threads = int(cfg.get("threads", 1))
    rows, checks = RUNNERS[cfg["experiment"]](cfg, Rng(int(cfg["seed"])), threads)
    # derived stream seeds stay internal; the report names the run seed
    rows = [dataclasses.replace(r, seed=int(cfg["seed"])) for r in rows]
    recorded = {k: v for k, v in sorted(cfg.items()) if k not in EXECUTION_KEYS}
    return ExperimentReport(cfg["experiment"], recorded, rows, checks)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        cfg = resolve_config(args)
    except (DomainError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "validate":
        try:
            diag = validate_config(cfg)
        except (DomainError, ValueError, KeyError) as e:
            diag = {"experiment": cfg["experiment"], "ok": False, "messages": [str(e)]}
        print(json.dumps(diag, indent=2, default=_jsonable))
        return 0 if diag["ok"] else 2
    try:
        report = run_experiment(cfg)
    except (DomainError, ResourceError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    fmt = cfg["format"]
    out = Path(cfg.get("out") or f"{cfg['experiment']}.{fmt}")
    report.write(out, fmt)
    if cfg.get("plot"):
        plot_report(report, out.with_suffix(".png"))
    for c in report.checks:
        tag = "ok  " if c.passed else "FAIL"
        print(f"{tag} {c.name}: {c.value:.6g} ({c.threshold}){' [exact]' if c.exact else ''}")
    print(f"wrote {out}")
    return 1 if report.exact_failures else 0


if __name__ == "__main__":
    sys.exit(main())
