"""Finite-horizon Busemann increments and their exact identities.

B(x, y) is approximated by G(x -> v_n) - G(y -> v_n) with v_n the floor of
n * xi_char(alpha).  One backward DP to v_n gives every increment in the
window, and recovery (min(B1, B2) = omega) already holds exactly at finite n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba as nb
import numpy as np

from . import rng as _rng
from .errors import DomainError
from .lattice import (
    LatticeRect,
    WeightField,
    backward_values,
    forward_values,
    sample_bulk,
)
from .parallel import map_replicates
from .rng import Rng
from .shape import as_rate, char_point, gpp, xi_char
from .stationary import _ne_values

TOL = 1e-9


def horizon_target(alpha, horizon: int) -> tuple[int, int]:
    """v_n = componentwise floor of n * xi_char(alpha)."""
    xi = xi_char(alpha)
    return int(math.floor(horizon * xi.xi1)), int(math.floor(horizon * xi.xi2))


@dataclass(frozen=True)
class BusemannField:
    alpha: float
    horizon: int
    target: tuple[int, int]
    window: LatticeRect
    B1: np.ndarray      # B(x, x+e1) for x in the window
    B2: np.ndarray      # B(x, x+e2)
    omega: np.ndarray   # bulk weights on the window

    def recovery_deviation(self) -> float:
        return float(np.abs(np.minimum(self.B1, self.B2) - self.omega).max())

    def between(self, x, y) -> float:
        """B(x, y) for window points x <= y, summed east along row x2 then north."""
        (a, b), (c, d) = x, y
        if not (a <= c and b <= d):
            raise DomainError("between() needs x <= y")
        return math.fsum(self.B1[a:c, b]) + math.fsum(self.B2[c, b:d])


def _window_from_backward(G, wm, wn):
    B1 = G[: wm + 1, : wn + 1] - G[1 : wm + 2, : wn + 1]
    B2 = G[: wm + 1, : wn + 1] - G[: wm + 1, 1 : wn + 2]
    return B1, B2


def busemann_field(alpha, horizon: int, window: LatticeRect,
                   w: Optional[WeightField] = None, rng: Optional[Rng] = None) -> BusemannField:
    a = as_rate(alpha)
    v = horizon_target(a, horizon)
    if window.m > v[0] - 1 or window.n > v[1] - 1:
        raise DomainError(f"window {window} must lie inside [0, {v} - (1,1)]")
    if w is None:
        if rng is None:
            raise DomainError("give either a weight field or an rng")
        w = sample_bulk(LatticeRect(*v), rng)
    elif w.stationary or w.rect.m < v[0] or w.rect.n < v[1]:
        raise DomainError("weights must be a bulk field covering [0, v_n]")
    W = w.vertex_weights()
    G = backward_values(W, v[0], v[1])
    B1, B2 = _window_from_backward(G, window.m, window.n)
    omega = np.array(W[: window.m + 1, : window.n + 1])
    for arr in (B1, B2, omega):
        arr.setflags(write=False)
    return BusemannField(a, horizon, v, window, B1, B2, omega)


class Stabilization(NamedTuple):
    stable_n: Optional[int]
    field: BusemannField
    stabilized: bool


def stabilization_horizon(alpha, window: LatticeRect, rng: Rng, n_schedule,
                          sampler=sample_bulk, tol: float = TOL) -> Stabilization:
    """First horizon at which no window increment moved by ``tol`` or more.

    The weights for every horizon come from ``sampler(rect, rng)``; with the
    coordinate-addressed generator, larger rectangles extend smaller ones.
    """
    schedule = [int(n) for n in n_schedule]
    if len(schedule) < 2 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("n_schedule must be increasing with at least two entries")
    prev = None
    for n in schedule:
        v = horizon_target(alpha, n)
        f = busemann_field(alpha, n, window, sampler(LatticeRect(*v), rng))
        if prev is not None:
            d = max(np.abs(f.B1 - prev.B1).max(), np.abs(f.B2 - prev.B2).max())
            if d < tol:
                return Stabilization(n, f, True)
        prev = f
    return Stabilization(None, prev, False)


def monotonicity_check(field_lo: BusemannField, field_hi: BusemannField, tol: float = TOL) -> int:
    """Count window edges breaking B1^lo <= B1^hi and B2^lo >= B2^hi."""
    if field_lo.window != field_hi.window:
        raise DomainError("fields must share a window")
    if field_lo.alpha > field_hi.alpha:
        raise DomainError("field_lo must have the smaller parameter")
    vl, vh = field_lo.target, field_hi.target
    if not (vh[0] <= vl[0] and vl[1] <= vh[1]):
        raise DomainError(f"targets {vl}, {vh} are not ordered north-west")
    bad = (field_lo.B1 > field_hi.B1 + tol) | (field_lo.B2 < field_hi.B2 - tol)
    return int(bad.sum())


def ne_reconstruction_check(field: BusemannField, u=(0, 0), corner=None) -> float:
    """Rebuild passage values toward ``corner`` from B on the north/east edges.

    Bulk weights are omega and the boundary comes from sums of B1 along the
    north row and B2 down the east column.  Returns the largest gap between
    the rebuilt values and B(x, corner) over the sub-window.
    """
    c = field.window.corner if corner is None else (int(corner[0]), int(corner[1]))
    u = (int(u[0]), int(u[1]))
    if not (0 <= u[0] <= c[0] <= field.window.m and 0 <= u[1] <= c[1] <= field.window.n):
        raise DomainError(f"sub-window [{u}, {c}] does not fit in {field.window}")
    north = np.ascontiguousarray(field.B1[u[0] : c[0], c[1]])
    east = np.ascontiguousarray(field.B2[c[0], u[1] : c[1]])
    hat = np.ascontiguousarray(field.omega[u[0] : c[0], u[1] : c[1]])
    G = _ne_values(hat, north, east)
    dev = 0.0
    for i in range(u[0], c[0] + 1):
        for j in range(u[1], c[1] + 1):
            ref = field.between((i, j), c)
            dev = max(dev, abs(G[i - u[0], j - u[1]] - ref))
    return dev


def variational_identity_check(field: BusemannField) -> tuple[float, float]:
    """(max |max_i(omega - B_i)|, |gpp(xi) - xi.grad|) at the field's alpha."""
    pointwise = float(np.abs(np.maximum(field.omega - field.B1, field.omega - field.B2)).max())
    a = field.alpha
    xi = xi_char(a)
    shape = abs(gpp(xi) - (xi.xi1 / (1.0 - a) + xi.xi2 / a))
    return pointwise, shape


# ------------------------------------------------------- replicate kernels


@nb.njit(cache=True, nogil=True)
def _busemann_kernel(start, stop, seed, v1, v2, wm, wn, B1, B2, rec):
    W = np.empty((v1 + 1, v2 + 1))
    for r in range(start, stop):
        key = _rng.key_of(seed, r)
        _rng.fill_exp_grid(key, 0, 0, 0, 1.0, W)
        G = backward_values(W, v1, v2)
        d = 0.0
        for i in range(wm + 1):
            for j in range(wn + 1):
                b1 = G[i, j] - G[i + 1, j]
                b2 = G[i, j] - G[i, j + 1]
                B1[r, i, j] = b1
                B2[r, i, j] = b2
                e = abs((b1 if b1 < b2 else b2) - W[i, j])
                if e > d:
                    d = e
        rec[r] = d


class BusemannSamples(NamedTuple):
    B1: np.ndarray        # (replicates, wm+1, wn+1)
    B2: np.ndarray
    recovery: np.ndarray  # per replicate, max |min(B1, B2) - omega| over the window


def busemann_samples(alpha, horizon: int, window: LatticeRect, replicates: int,
                     rng: Rng, threads: int = 1) -> BusemannSamples:
    """Window increments for each replicate; replicate r uses stream r of ``rng.seed``."""
    v = horizon_target(alpha, horizon)
    if window.m > v[0] - 1 or window.n > v[1] - 1:
        raise DomainError("window exceeds the horizon grid")
    B1 = np.empty((replicates, window.m + 1, window.n + 1))
    B2 = np.empty_like(B1)
    rec = np.empty(replicates)
    map_replicates(_busemann_kernel, replicates, np.uint64(rng.seed), v[0], v[1],
                   window.m, window.n, B1, B2, rec, threads=threads)
    return BusemannSamples(B1, B2, rec)


def staircase_edges(B1: np.ndarray, B2: np.ndarray, start, pairs: int) -> np.ndarray:
    """Increments along a down-right staircase (e1, -e2, e1, ...) from ``start``.

    Returns an array (replicates, 2*pairs) of the traversed edge variables.
    """
    x, y = start
    cols = []
    for _ in range(pairs):
        cols.append(B1[:, x, y])
        x += 1
        y -= 1
        if y < 0:
            raise DomainError("staircase leaves the window")
        cols.append(B2[:, x, y])
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------- midpoint


@dataclass(frozen=True)
class MidpointConfig:
    N_list: tuple
    rho: float
    replicates: int
    midpoint_fraction: float = 0.5

    def __post_init__(self):
        r = as_rate(self.rho)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "N_list", tuple(int(N) for N in self.N_list))
        if not 0 < self.midpoint_fraction < 1:
            raise DomainError("midpoint_fraction must lie in (0, 1)")
        if self.replicates < 1:
            raise DomainError("replicates must be positive")
        for N in self.N_list:
            m, n = char_point(N, r)
            if min(m, n) < 2:
                raise DomainError(f"N={N} gives characteristic point {(m, n)}; need both >= 2")


@nb.njit(cache=True, nogil=True)
def _midpoint_kernel(start, stop, seed, v1, v2, z1, z2, transpose, hits):
    W = np.empty((v1 + 1, v2 + 1))
    for r in range(start, stop):
        key = _rng.key_of(seed, r)
        for i in range(v1 + 1):
            for j in range(v2 + 1):
                if transpose:
                    W[i, j] = _rng.exp_at(key, 0, j, i, 1.0)
                else:
                    W[i, j] = _rng.exp_at(key, 0, i, j, 1.0)
        F = forward_values(W)
        Bk = backward_values(W[z1:, z2:], v1 - z1, v2 - z2)
        through = F[z1, z2] + Bk[0, 0] - W[z1, z2]
        hits[r] = abs(through - F[v1, v2]) <= 1e-9


def midpoint_hits(v, z, replicates: int, rng: Rng, threads: int = 1,
                  transpose: bool = False) -> np.ndarray:
    """Per-replicate indicator that z lies on the geodesic from 0 to v."""
    v = (int(v[0]), int(v[1]))
    z = (int(z[0]), int(z[1]))
    if not (0 <= z[0] <= v[0] and 0 <= z[1] <= v[1]):
        raise DomainError("z must lie between 0 and v")
    if transpose:
        v, z = (v[1], v[0]), (z[1], z[0])
    hits = np.zeros(replicates, dtype=np.bool_)
    map_replicates(_midpoint_kernel, replicates, np.uint64(rng.seed), v[0], v[1], z[0], z[1],
                   transpose, hits, threads=threads)
    return hits


class MidpointRow(NamedTuple):
    N: int
    target: tuple
    midpoint: tuple
    probability: float
    stderr: float
    replicates: int


def midpoint_experiment(cfg: MidpointConfig, rng: Rng, threads: int = 1,
                        transpose: bool = False) -> list[MidpointRow]:
    rows = []
    xi = xi_char(cfg.rho)
    for N in cfg.N_list:
        v = (int(math.floor(N * xi.xi1)), int(math.floor(N * xi.xi2)))
        z = (int(math.floor(cfg.midpoint_fraction * v[0])), int(math.floor(cfg.midpoint_fraction * v[1])))
        if z == (0, 0) or z == v:
            raise DomainError(f"midpoint {z} coincides with an endpoint at N={N}")
        hits = midpoint_hits(v, z, cfg.replicates, rng.child("midpoint", N), threads, transpose)
        p = float(hits.mean())
        se = math.sqrt(max(p * (1 - p), 0.0) / cfg.replicates)
        rows.append(MidpointRow(N, v, z, p, se, cfg.replicates))
    return rows
