"""Closed-form limit shapes and characteristic directions for exponential weights."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Direction:
    """Asymptotic direction (xi1, xi2) in the closed first quadrant."""

    xi1: float
    xi2: float

    def __post_init__(self):
        if not (self.xi1 >= 0 and self.xi2 >= 0):
            raise DomainError(f"direction coordinates must be nonnegative: {self}")
        if self.xi1 + self.xi2 <= 0:
            raise DomainError("direction must be nonzero")

    def normalized(self) -> "Direction":
        s = self.xi1 + self.xi2
        return Direction(self.xi1 / s, self.xi2 / s)

    @property
    def interior(self) -> bool:
        return self.xi1 > 0 and self.xi2 > 0

    def __iter__(self):
        yield self.xi1
        yield self.xi2


@dataclass(frozen=True)
class Tilt:
    h1: float
    h2: float


@dataclass(frozen=True)
class BoundaryRate:
    """Boundary parameter rho, strictly inside (0, 1)."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise DomainError(f"boundary rate must lie in (0, 1), got {self.rho}")

    def __float__(self):
        return float(self.rho)


def as_rate(rho) -> float:
    """Accept a BoundaryRate or a bare float; validate and return the float."""
    if isinstance(rho, BoundaryRate):
        return rho.rho
    return BoundaryRate(float(rho)).rho


def _pair(xi):
    if isinstance(xi, Direction):
        return xi.xi1, xi.xi2
    s, t = xi
    return float(s), float(t)


def gpp(xi) -> float:
    """Point-to-point shape function (sqrt(s) + sqrt(t))**2."""
    s, t = _pair(xi)
    if s < 0 or t < 0:
        raise DomainError("gpp is defined on the closed first quadrant")
    return (math.sqrt(s) + math.sqrt(t)) ** 2


def gpl(h) -> float:
    """Point-to-line (tilted) limit 1 + (h1+h2)/2 + sqrt((h1-h2)**2 + 4)/2."""
    h1, h2 = (h.h1, h.h2) if isinstance(h, Tilt) else map(float, h)
    return 1.0 + 0.5 * (h1 + h2) + 0.5 * math.sqrt((h1 - h2) ** 2 + 4.0)


def g_stationary(s: float, t: float, rho) -> float:
    """Mean growth rate s/(1-rho) + t/rho of the increment-stationary model."""
    r = as_rate(rho)
    if s < 0 or t < 0:
        raise DomainError("g_stationary needs s, t >= 0")
    return s / (1.0 - r) + t / r


def xi_char(rho) -> Direction:
    """Characteristic direction ((1-rho)^2, rho^2), normalized."""
    r = as_rate(rho)
    a, b = (1.0 - r) ** 2, r * r
    return Direction(a / (a + b), b / (a + b))


def rho_for_direction(xi) -> float:
    """Inverse of xi_char: the rho whose characteristic direction is xi."""
    s, t = _pair(xi)
    if not (s > 0 and t > 0):
        raise DomainError("no interior rho for a direction on an axis")
    return math.sqrt(t) / (math.sqrt(s) + math.sqrt(t))


def grad_gpp(s: float, t: float) -> tuple[float, float]:
    if not (s > 0 and t > 0):
        raise DomainError("gradient of gpp is singular on the axes")
    return 1.0 + math.sqrt(t / s), 1.0 + math.sqrt(s / t)


def duality_gap(h, grid_points: int) -> float:
    """gpl(h) minus the best gpp(xi) + h.xi over a uniform grid of the simplex.

    A cross-check of convex duality, not a solver: the gap is >= 0 and shrinks
    like grid_points**-2 because the maximizer is interior for finite h.
    """
    if grid_points < 2:
        raise DomainError("grid_points must be >= 2")
    h1, h2 = (h.h1, h.h2) if isinstance(h, Tilt) else map(float, h)
    s = np.linspace(0.0, 1.0, grid_points)
    vals = (np.sqrt(s) + np.sqrt(1.0 - s)) ** 2 + h1 * s + h2 * (1.0 - s)
    return gpl((h1, h2)) - float(vals.max())


def mean_stationary(m: int, n: int, rho) -> float:
    """E[G^rho_{0,(m,n)}] = m/(1-rho) + n/rho."""
    if m < 0 or n < 0:
        raise DomainError("m, n must be >= 0")
    r = as_rate(rho)
    return m / (1.0 - r) + n / r


def char_point(N: float, rho) -> tuple[int, int]:
    """Componentwise floor of N * ((1-rho)^2, rho^2)."""
    r = as_rate(rho)
    return int(math.floor(N * (1.0 - r) ** 2)), int(math.floor(N * r * r))


def kappa(m: int, n: int, N: float, rho) -> float:
    """Deviation of (m, n) from the characteristic point at scale N."""
    r = as_rate(rho)
    return max(abs(m - N * (1.0 - r) ** 2), abs(n - N * r * r))
