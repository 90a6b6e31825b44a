"""Increment-stationary corner growth: boundary sampling, the corner-flip map
and the increment system it generates.

Edge arrays are indexed by the lower/left endpoint: ``I[i, j]`` is the weight
of the horizontal edge (i,j)->(i+1,j) and ``J[i, j]`` the weight of the
vertical edge (i,j)->(i,j+1).  The quadrant origin is always (0, 0).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from . import rng as _rng
from .errors import DomainError
from .lattice import (
    LatticeRect,
    LppGrid,
    WeightField,
    geodesic_backtrace,
    lpp_forward,
)
from .rng import Rng
from .shape import as_rate


def sample_boundary(rect: LatticeRect, rho, rng: Rng) -> WeightField:
    """Exp(1) bulk, Exp(1-rho) south edges and Exp(rho) west edges."""
    r = as_rate(rho)
    key = rng.key
    bulk = np.zeros(rect.shape)
    if rect.m and rect.n:
        _rng.fill_exp_grid(key, _rng.BULK, 1, 1, 1.0, bulk[1:, 1:])
    south = np.empty(rect.m)
    west = np.empty(rect.n)
    _rng.fill_exp_line(key, _rng.SOUTH, 1, 1.0 - r, south)
    _rng.fill_exp_line(key, _rng.WEST, 1, r, west)
    return WeightField(rect, bulk, south, west, r)


def corner_flip(W: float, I: float, J: float) -> tuple[float, float, float]:
    """(W, I, J) -> (I^J, W + (I-J)^+, W + (I-J)^-).  An involution."""
    if W < 0 or I < 0 or J < 0:
        raise DomainError("corner_flip takes nonnegative weights")
    d = I - J
    return min(I, J), W + max(d, 0.0), W + max(-d, 0.0)


@nb.njit(cache=True, nogil=True)
def _propagate(omega, south, west, I, J, hat):
    m = south.shape[0]
    n = west.shape[0]
    for i in range(m):
        I[i, 0] = south[i]
    for j in range(n):
        J[0, j] = west[j]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            a = I[i - 1, j - 1]
            b = J[i - 1, j - 1]
            w = omega[i, j]
            d = a - b
            hat[i - 1, j - 1] = a if a < b else b
            I[i - 1, j] = w + (d if d > 0.0 else 0.0)
            J[i, j - 1] = w + (-d if d < 0.0 else 0.0)


@dataclass(frozen=True)
class IncrementSystem:
    rect: LatticeRect
    rho: float
    I: np.ndarray          # (m, n+1)
    J: np.ndarray          # (m+1, n)
    omega_hat: np.ndarray  # (m, n); the flipped weight of each unit square's SW corner
    omega: np.ndarray      # (m+1, n+1) bulk weights, axes unused

    def recovery_deviation(self) -> float:
        """max |omega_x - I_x ^ J_x| over interior x (I_x, J_x incoming to x)."""
        if not (self.rect.m and self.rect.n):
            return 0.0
        incoming = np.minimum(self.I[:, 1:], self.J[1:, :])
        return float(np.abs(self.omega[1:, 1:] - incoming).max())

    def additivity_deviation(self) -> float:
        """max |I_{x-e2} + J_x - J_{x-e1} - I_x| around every unit square."""
        if not (self.rect.m and self.rect.n):
            return 0.0
        lhs = self.I[:, :-1] + self.J[1:, :]
        rhs = self.J[:-1, :] + self.I[:, 1:]
        return float(np.abs(lhs - rhs).max())


def propagate_increments(w: WeightField) -> IncrementSystem:
    """Run the corner-flip sweep north-east from the boundary data of ``w``."""
    if not w.stationary:
        raise DomainError("propagate_increments needs a stationary-mode field")
    m, n = w.rect.m, w.rect.n
    I = np.empty((m, n + 1))
    J = np.empty((m + 1, n))
    hat = np.empty((m, n))
    _propagate(w.bulk, w.south, w.west, I, J, hat)
    for a in (I, J, hat):
        a.setflags(write=False)
    rho = w.rho if w.rho is not None else float("nan")
    return IncrementSystem(w.rect, rho, I, J, hat, w.bulk)


def verify_increment_identity(sys: IncrementSystem, grid: LppGrid) -> float:
    """max deviation between the propagated I, J and the increments of ``grid``."""
    if grid.rect != sys.rect or grid.orientation != "forward":
        raise DomainError("grid must be the forward stationary grid of the same rectangle")
    G = grid.values
    dev = 0.0
    if sys.I.size:
        dev = max(dev, float(np.abs(sys.I - (G[1:, :] - G[:-1, :])).max()))
    if sys.J.size:
        dev = max(dev, float(np.abs(sys.J - (G[:, 1:] - G[:, :-1])).max()))
    return dev


class ExitStats(NamedTuple):
    exit1: int
    exit2: int
    S1: float
    S2: float
    G: float


def exit_statistics(w: WeightField) -> ExitStats:
    if not w.stationary:
        raise DomainError("exit statistics need a stationary-mode field")
    if w.rect.m + w.rect.n == 0:
        raise DomainError("rectangle must contain a step")
    g = lpp_forward(w)
    geo = geodesic_backtrace(g, w)
    return ExitStats(geo.exit1, geo.exit2, geo.boundary_sum1, geo.boundary_sum2, g[w.rect.corner])


@nb.njit(cache=True, nogil=True)
def _ne_values(hat, north, east):
    c1 = north.shape[0]
    c2 = east.shape[0]
    G = np.empty((c1 + 1, c2 + 1))
    G[c1, c2] = 0.0
    for i in range(c1 - 1, -1, -1):
        G[i, c2] = G[i + 1, c2] + north[i]
    for j in range(c2 - 1, -1, -1):
        G[c1, j] = G[c1, j + 1] + east[j]
    for i in range(c1 - 1, -1, -1):
        for j in range(c2 - 1, -1, -1):
            a = G[i + 1, j]
            b = G[i, j + 1]
            G[i, j] = hat[i, j] + (a if a > b else b)
    return G


def ne_stationary_grid(w, ne_boundary, corner=None) -> LppGrid:
    """Passage values toward ``corner`` with I/J on the north and east borders.

    ``w`` holds the bulk weights of [0, corner - (1,1)] (an array or a
    WeightField); ``ne_boundary = (north, east)`` where ``north[i]`` is I on
    the edge (i,c2)->(i+1,c2) and ``east[j]`` is J on (c1,j)->(c1,j+1).
    """
    hat = w.bulk if isinstance(w, WeightField) else np.asarray(w, dtype=float)
    north, east = (np.asarray(a, dtype=float) for a in ne_boundary)
    c = (north.shape[0], east.shape[0]) if corner is None else (int(corner[0]), int(corner[1]))
    if north.shape != (c[0],) or east.shape != (c[1],):
        raise DomainError("north/east boundary lengths must match the corner")
    if hat.shape[0] < c[0] or hat.shape[1] < c[1]:
        raise DomainError("bulk weights do not cover the rectangle")
    G = _ne_values(np.ascontiguousarray(hat[: c[0], : c[1]]), north, east)
    return LppGrid(LatticeRect(*c), G, "backward", "stationary", c)


def ne_grid_of(sys: IncrementSystem) -> LppGrid:
    """NE grid built from a propagated system: flipped bulk, its own north/east edges."""
    m, n = sys.rect.m, sys.rect.n
    return ne_stationary_grid(sys.omega_hat, (sys.I[:, n], sys.J[m, :]), (m, n))


def ne_increment_deviation(sys: IncrementSystem, grid: LppGrid) -> float:
    G = grid.values
    dev = 0.0
    if sys.I.size:
        dev = max(dev, float(np.abs(sys.I - (G[:-1, :] - G[1:, :])).max()))
    if sys.J.size:
        dev = max(dev, float(np.abs(sys.J - (G[:, :-1] - G[:, 1:])).max()))
    return dev


@dataclass(frozen=True)
class DownRightPath:
    """Vertices y_0, y_1, ... with every step equal to e1 or -e2."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple((int(a), int(b)) for a, b in self.vertices)
        if not vs:
            raise DomainError("empty path")
        for p, q in zip(vs, vs[1:]):
            if (q[0] - p[0], q[1] - p[1]) not in ((1, 0), (0, -1)):
                raise DomainError(f"step {p}->{q} is not e1 or -e2")
        object.__setattr__(self, "vertices", vs)

    @classmethod
    def from_steps(cls, start, steps: str) -> "DownRightPath":
        """``steps`` is a string over {'r', 'd'} (e1 and -e2)."""
        vs = [tuple(start)]
        for s in steps:
            x, y = vs[-1]
            vs.append((x + 1, y) if s == "r" else (x, y - 1))
        return cls(tuple(vs))

    @classmethod
    def axes(cls, m: int, n: int) -> "DownRightPath":
        return cls.from_steps((0, n), "d" * n + "r" * m)

    @classmethod
    def staircase(cls, start, pairs: int, first: str = "r") -> "DownRightPath":
        other = "d" if first == "r" else "r"
        return cls.from_steps(start, (first + other) * pairs)


class DownRightSplit(NamedTuple):
    edges: np.ndarray
    hat: np.ndarray
    bulk: np.ndarray
    minus_sites: list
    plus_sites: list


def down_right_collect(sys: IncrementSystem, path: DownRightPath) -> DownRightSplit:
    """Edge weights along ``path``, flipped weights south-west of it, bulk weights north-east."""
    rect = sys.rect
    on_path = set(path.vertices)
    if not all(rect.contains(v) for v in on_path):
        raise DomainError("path leaves the system rectangle")
    edges = []
    for p, q in zip(path.vertices, path.vertices[1:]):
        edges.append(sys.I[p] if q[0] > p[0] else sys.J[q])
    minus, plus = [], []
    reach = min(rect.m, rect.n) + 1
    for i in range(rect.m + 1):
        for j in range(rect.n + 1):
            if (i, j) in on_path:
                continue
            if any((i + k, j + k) in on_path for k in range(1, reach)):
                minus.append((i, j))
            elif any((i - k, j - k) in on_path for k in range(1, reach)):
                plus.append((i, j))
    hat = np.array([sys.omega_hat[x] for x in minus])
    bulk = np.array([sys.omega[x] for x in plus])
    return DownRightSplit(np.array(edges), hat, bulk, minus, plus)


def scaling_coupling(w: WeightField, lam) -> WeightField:
    """Re-express the boundary of ``w`` at a larger parameter ``lam``.

    I grows by (1-rho)/(1-lam) and J shrinks by rho/lam, which turns the
    Exp(1-rho), Exp(rho) boundary into Exp(1-lam), Exp(lam).
    """
    if not w.stationary or w.rho is None:
        raise DomainError("scaling_coupling needs a stationary field with known rho")
    lam = as_rate(lam)
    rho = w.rho
    if not lam > rho:
        raise DomainError(f"coupling needs lam > rho, got lam={lam}, rho={rho}")
    return WeightField(w.rect, w.bulk, w.south * ((1 - rho) / (1 - lam)), w.west * (rho / lam), lam)


def partial_sum_monotone(lo: np.ndarray, hi: np.ndarray) -> bool:
    """Check S^hi_l - S^lo_l <= S^hi_k - S^lo_k for all l <= k."""
    d = np.concatenate([[0.0], np.cumsum(hi - lo)])
    return bool(np.all(np.diff(d) >= -1e-12))


# ------------------------------------------------- rolling replicate kernels


@nb.njit(cache=True, nogil=True)
def stationary_terminal(key, m, n, rate_i, rate_j, col, lab, prefix_j):
    """G^rho_{0,(m,n)} with its exit point, in O(n) memory.

    Each column entry carries the signed exit label of its maximizing path
    (+k: left the e1-axis at (k,0); -k: left the e2-axis at (0,k)), with the
    same tie rule as the backtrace.  Returns (G, exit1, exit2, S1, S2).
    """
    col[0] = 0.0
    lab[0] = 0
    prefix_j[0] = 0.0
    for j in range(1, n + 1):
        col[j] = col[j - 1] + _rng.exp_at(key, 2, j, 0, rate_j)
        prefix_j[j] = col[j]
        lab[j] = -j
    s1_running = 0.0
    for i in range(1, m + 1):
        wi = _rng.exp_at(key, 1, i, 0, rate_i)
        s1_running += wi
        col[0] = s1_running
        lab[0] = i
        for j in range(1, n + 1):
            a = col[j]
            b = col[j - 1]
            if a > b:
                col[j] = _rng.exp_at(key, 0, i, j, 1.0) + a
            else:
                col[j] = _rng.exp_at(key, 0, i, j, 1.0) + b
                lab[j] = lab[j - 1]
    G = col[n]
    L = lab[n]
    if L > 0:
        # S1 = sum of the first L south weights; recompute exactly
        s = 0.0
        for i in range(1, L + 1):
            s += _rng.exp_at(key, 1, i, 0, rate_i)
        return G, L, 0, s, 0.0
    elif L < 0:
        return G, 0, -L, 0.0, prefix_j[-L]
    return G, 0, 0, 0.0, 0.0
