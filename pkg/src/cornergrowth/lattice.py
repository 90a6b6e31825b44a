"""Weights, last-passage dynamic programs and geodesics on a rectangle.

Arrays are indexed ``[i, j]`` for the vertex ``(i, j)``; ``i`` counts e1 steps
and ``j`` counts e2 steps.  Every DP here works on *vertex* weights: in
stationary mode the boundary edge weights are placed on the axis vertices
(``I`` on ``(i, 0)``, ``J`` on ``(0, j)``) and the corner carries 0, which makes
the stationary recursion the ordinary one.

Missing neighbours are handled by index bounds, so no -inf sentinel ever
enters arithmetic.
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np

from . import rng as _rng
from .errors import DomainError, ResourceError
from .rng import Rng
from .shape import as_rate

DEFAULT_MEMORY_CAP_MB = 4096
TOL = 1e-9


def memory_cap_bytes() -> int:
    mb = os.environ.get("CGM_MEMORY_CAP_MB")
    return int(float(mb) * 2**20) if mb else DEFAULT_MEMORY_CAP_MB * 2**20


def grid_bytes(m: int, n: int) -> int:
    return (m + 1) * (n + 1) * 8


@dataclass(frozen=True)
class LatticeRect:
    """The vertex set {0..m} x {0..n}."""

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 0 or self.n < 0:
            raise DomainError(f"rectangle extents must be nonnegative integers: {self}")
        if max(self.m, self.n) > _rng.MAX_COORD:
            raise DomainError("rectangle exceeds the addressable lattice")
        if grid_bytes(self.m, self.n) > memory_cap_bytes():
            raise ResourceError(
                f"a {self.m + 1}x{self.n + 1} grid needs {grid_bytes(self.m, self.n)} bytes, "
                f"over the cap of {memory_cap_bytes()} (set CGM_MEMORY_CAP_MB)"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m + 1, self.n + 1)

    @property
    def corner(self) -> tuple[int, int]:
        return (self.m, self.n)

    def contains(self, x) -> bool:
        return 0 <= x[0] <= self.m and 0 <= x[1] <= self.n


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightField:
    """Bulk vertex weights plus optional south/west boundary edge weights.

    ``south[i-1]`` is I on the edge ((i-1,0),(i,0)) and ``west[j-1]`` is J on
    the edge ((0,j-1),(0,j)).  With boundary arrays present the field is in
    stationary mode and the bulk entries on the axes are ignored.
    """

    rect: LatticeRect
    bulk: np.ndarray
    south: Optional[np.ndarray] = None
    west: Optional[np.ndarray] = None
    rho: Optional[float] = None
    _vertex: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        bulk = _frozen(self.bulk)
        if bulk.shape != self.rect.shape:
            raise DomainError(f"bulk shape {bulk.shape} does not match {self.rect.shape}")
        if (self.south is None) != (self.west is None):
            raise DomainError("south and west boundary arrays must be given together")
        object.__setattr__(self, "bulk", bulk)
        if self.south is not None:
            south, west = _frozen(self.south), _frozen(self.west)
            if south.shape != (self.rect.m,) or west.shape != (self.rect.n,):
                raise DomainError("boundary arrays must have lengths m and n")
            object.__setattr__(self, "south", south)
            object.__setattr__(self, "west", west)
            if self.rho is not None:
                object.__setattr__(self, "rho", as_rate(self.rho))
        if np.any(bulk < 0) or (self.south is not None and (np.any(self.south < 0) or np.any(self.west < 0))):
            raise DomainError("weights must be nonnegative")

    @property
    def stationary(self) -> bool:
        return self.south is not None

    @property
    def mode(self) -> str:
        return "stationary" if self.stationary else "bulk"

    def vertex_weights(self) -> np.ndarray:
        """Weights seen by the DP, with the boundary folded onto the axes."""
        if self._vertex is None:
            if self.stationary:
                w = self.bulk.copy()
                w[0, 0] = 0.0
                w[1:, 0] = self.south
                w[0, 1:] = self.west
            else:
                w = self.bulk
            object.__setattr__(self, "_vertex", _frozen(w))
        return self._vertex


@dataclass(frozen=True)
class LppGrid:
    """Table of last-passage values.

    Forward grids hold G(0 -> x) over ``rect``; backward grids hold
    G(x -> target) over the sub-rectangle [0, target], so ``rect`` is then
    ``LatticeRect(*target)``.
    """

    rect: LatticeRect
    values: np.ndarray
    orientation: str = "forward"
    mode: str = "bulk"
    target: Optional[tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != self.rect.shape:
            raise DomainError("grid values do not match the rectangle")
        if self.target is None:
            object.__setattr__(self, "target", self.rect.corner)

    def __getitem__(self, x) -> float:
        return float(self.values[x[0], x[1]])


@dataclass(frozen=True)
class Geodesic:
    path: np.ndarray
    exit1: int
    exit2: int
    boundary_sum1: float
    boundary_sum2: float
    weight: float

    @property
    def vertices(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.path}


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True, nogil=True)
def forward_values(W):
    m1, n1 = W.shape
    G = np.empty((m1, n1))
    G[0, 0] = W[0, 0]
    for j in range(1, n1):
        G[0, j] = G[0, j - 1] + W[0, j]
    for i in range(1, m1):
        G[i, 0] = G[i - 1, 0] + W[i, 0]
        for j in range(1, n1):
            a = G[i - 1, j]
            b = G[i, j - 1]
            G[i, j] = W[i, j] + (a if a > b else b)
    return G


@nb.njit(cache=True, nogil=True)
def backward_values(W, t1, t2):
    G = np.empty((t1 + 1, t2 + 1))
    G[t1, t2] = W[t1, t2]
    for j in range(t2 - 1, -1, -1):
        G[t1, j] = G[t1, j + 1] + W[t1, j]
    for i in range(t1 - 1, -1, -1):
        G[i, t2] = G[i + 1, t2] + W[i, t2]
        for j in range(t2 - 1, -1, -1):
            a = G[i + 1, j]
            b = G[i, j + 1]
            G[i, j] = W[i, j] + (a if a > b else b)
    return G


@nb.njit(cache=True, nogil=True)
def backtrace_path(G, t1, t2):
    """Maximizing path from (0,0) to (t1,t2); exact ties go to the e2 in-neighbour."""
    L = t1 + t2
    path = np.empty((L + 1, 2), dtype=np.int64)
    i, j = t1, t2
    for k in range(L, -1, -1):
        path[k, 0] = i
        path[k, 1] = j
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        elif G[i - 1, j] > G[i, j - 1]:
            i -= 1
        else:
            j -= 1
    return path


@nb.njit(cache=True, nogil=True)
def terminal_bulk(key, m, n, col):
    """Bulk LPP value G(0 -> (m,n)) with on-the-fly weights and one column of memory."""
    col[0] = _rng.exp_at(key, 0, 0, 0, 1.0)
    for j in range(1, n + 1):
        col[j] = col[j - 1] + _rng.exp_at(key, 0, 0, j, 1.0)
    for i in range(1, m + 1):
        col[0] += _rng.exp_at(key, 0, i, 0, 1.0)
        for j in range(1, n + 1):
            a = col[j]
            b = col[j - 1]
            col[j] = _rng.exp_at(key, 0, i, j, 1.0) + (a if a > b else b)
    return col[n]


# ---------------------------------------------------------------- operations


def sample_exp(rate: float, rng: Rng) -> float:
    """One Exp(rate) draw by inverse CDF, -ln(U)/rate with U in (0, 1)."""
    if not rate > 0:
        raise DomainError("rate must be positive")
    return -math.log(rng.uniform()) / rate


def sample_bulk(rect: LatticeRect, rng: Rng) -> WeightField:
    """I.i.d. Exp(1) weights on every vertex of ``rect``.

    Weights are addressed by coordinate, so a larger rectangle drawn from the
    same ``rng`` extends this one without resampling it.
    """
    bulk = np.empty(rect.shape)
    _rng.fill_exp_grid(rng.key, _rng.BULK, 0, 0, 1.0, bulk)
    return WeightField(rect, bulk)


def lpp_forward(w: WeightField) -> LppGrid:
    G = forward_values(w.vertex_weights())
    return LppGrid(w.rect, G, "forward", w.mode)


def _check_vertex(rect: LatticeRect, x, what="vertex"):
    x = (int(x[0]), int(x[1]))
    if not rect.contains(x):
        raise DomainError(f"{what} {x} lies outside {rect}")
    return x


def lpp_backward(w: WeightField, target) -> LppGrid:
    """G(x -> target) for every x <= target, both endpoint weights counted."""
    if w.stationary:
        raise DomainError("backward passage values are defined for bulk fields")
    t = _check_vertex(w.rect, target, "target")
    G = backward_values(w.vertex_weights(), t[0], t[1])
    return LppGrid(LatticeRect(*t), G, "backward", "bulk", t)


def _path_weight(W, path) -> float:
    return math.fsum(W[path[:, 0], path[:, 1]])


def geodesic_backtrace(g: LppGrid, w: WeightField, target=None) -> Geodesic:
    if g.orientation != "forward":
        raise DomainError("backtrace needs a forward grid")
    t = _check_vertex(g.rect, g.rect.corner if target is None else target, "target")
    path = backtrace_path(g.values, t[0], t[1])
    W = w.vertex_weights()
    on_x = path[:, 1] == 0
    on_y = path[:, 0] == 0
    exit1 = int(path[on_x, 0].max())
    exit2 = int(path[on_y, 1].max())
    s1 = math.fsum(W[1 : exit1 + 1, 0])
    s2 = math.fsum(W[0, 1 : exit2 + 1])
    path.setflags(write=False)
    return Geodesic(path, exit1, exit2, s1, s2, _path_weight(W, path))


def lpp_through_point(w: WeightField, z, target) -> float:
    """Best passage value from 0 to ``target`` among paths through ``z``."""
    if w.stationary:
        raise DomainError("through-point values are defined for bulk fields")
    t = _check_vertex(w.rect, target, "target")
    z = (int(z[0]), int(z[1]))
    if not (0 <= z[0] <= t[0] and 0 <= z[1] <= t[1]):
        raise DomainError(f"{z} is not between the origin and {t}")
    W = w.vertex_weights()
    fwd = forward_values(W[: z[0] + 1, : z[1] + 1])[z[0], z[1]]
    bwd = backward_values(W[z[0] : t[0] + 1, z[1] : t[1] + 1], t[0] - z[0], t[1] - z[1])[0, 0]
    return float(fwd + bwd - W[z[0], z[1]])


def increments_to_target(w: WeightField, target) -> tuple[np.ndarray, np.ndarray]:
    """Backward increments toward ``target``.

    Returns ``(I, J)`` with ``I[x] = G(x->t) - G(x+e1->t)`` of shape
    ``(t1, t2+1)`` and ``J[y] = G(y->t) - G(y+e2->t)`` of shape ``(t1+1, t2)``.
    """
    G = lpp_backward(w, target).values
    return _frozen(G[:-1, :] - G[1:, :]), _frozen(G[:, :-1] - G[:, 1:])


def path_deviation(geo) -> float:
    """Largest l1 distance between the path and the straight segment joining its ends."""
    path = np.asarray(geo.path if isinstance(geo, Geodesic) else geo, dtype=float)
    if len(path) < 2:
        raise DomainError("path must contain at least one step")
    x, y = path[0], path[-1]
    L = np.abs(y - x).sum()
    i = np.arange(len(path))[:, None]
    line = (L - i) / L * x + i / L * y
    return float(np.abs(path - line).sum(axis=1).max())


# ---------------------------------------------------------------- debug dump

MAGIC = b"CGML"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sHIIBd")
MODE_WEIGHTS_BULK, MODE_WEIGHTS_STATIONARY = 0, 1
MODE_GRID_FORWARD_BULK, MODE_GRID_FORWARD_STATIONARY, MODE_GRID_BACKWARD = 2, 3, 4


def dump(obj, path) -> None:
    """Write a WeightField or LppGrid in the little-endian CGML debug format."""
    if isinstance(obj, WeightField):
        mode = MODE_WEIGHTS_STATIONARY if obj.stationary else MODE_WEIGHTS_BULK
        arrays = [obj.bulk] + ([obj.south, obj.west] if obj.stationary else [])
        rho = obj.rho
    elif isinstance(obj, LppGrid):
        if obj.orientation == "backward":
            mode = MODE_GRID_BACKWARD
        else:
            mode = MODE_GRID_FORWARD_STATIONARY if obj.mode == "stationary" else MODE_GRID_FORWARD_BULK
        arrays, rho = [obj.values], None
    else:
        raise TypeError(f"cannot dump {type(obj).__name__}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, DUMP_VERSION, obj.rect.m, obj.rect.n, mode,
                              float("nan") if rho is None else rho))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, m, n, mode, rho = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != DUMP_VERSION:
        raise ValueError(f"{path} is not a CGML v{DUMP_VERSION} dump")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    rect = LatticeRect(m, n)
    size = (m + 1) * (n + 1)
    body = data[:size].reshape(rect.shape)
    rho = None if math.isnan(rho) else rho
    if mode == MODE_WEIGHTS_BULK:
        return WeightField(rect, body)
    if mode == MODE_WEIGHTS_STATIONARY:
        return WeightField(rect, body, data[size:size + m], data[size + m:size + m + n], rho)
    if mode == MODE_GRID_BACKWARD:
        return LppGrid(rect, body, "backward", "bulk", (m, n))
    grid_mode = "stationary" if mode == MODE_GRID_FORWARD_STATIONARY else "bulk"
    return LppGrid(rect, body, "forward", grid_mode)
