"""Counter-based random numbers addressed by (seed, stream, channel, i, j).

Every draw is a pure function of its address: the stream key is derived from
``(seed, stream)`` and the 64-bit output is two rounds of the SplitMix64
finalizer applied to ``key`` and the counter.  Because nothing is sequential,
a lattice weight at vertex ``(i, j)`` has the same value no matter how large
the rectangle being sampled is, and replicate ``r`` never depends on how many
replicates ran before it or on which thread ran it.

Counter layout (64 bits)::

    channel (4 bits) | i (30 bits) | j (30 bits)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)

MAX_COORD = (1 << 30) - 1

# channels
BULK = 0
SOUTH = 1
WEST = 2
SEQUENTIAL = 3
AUX0 = 4
AUX1 = 5
AUX2 = 6
AUX3 = 7
RESAMPLE = 8


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def key_of(seed, stream):
    s = mix64(np.uint64(seed) + GOLDEN)
    return mix64(s ^ (mix64(np.uint64(stream) * _STREAM_SALT + GOLDEN)))


def stream_key(seed, stream) -> np.uint64:
    """Key of replicate ``stream`` of experiment ``seed`` (a numpy uint64)."""
    return np.uint64(key_of(np.uint64(seed), np.uint64(stream)))


@nb.njit(cache=True, inline="always")
def counter(channel, i, j):
    return (
        (np.uint64(channel) << np.uint64(60))
        | (np.uint64(i) << np.uint64(30))
        | np.uint64(j)
    )


@nb.njit(cache=True, inline="always")
def bits_at(key, ctr):
    x = mix64(key ^ (ctr * GOLDEN))
    return mix64(x + key)


@nb.njit(cache=True, inline="always")
def uniform_at(key, channel, i, j):
    # 53-bit midpoint grid: never 0, never 1
    b = bits_at(key, counter(channel, i, j)) >> np.uint64(11)
    return (np.float64(b) + 0.5) * 1.1102230246251565e-16


@nb.njit(cache=True, inline="always")
def exp_at(key, channel, i, j, rate):
    return -np.log(uniform_at(key, channel, i, j)) / rate


@nb.njit(cache=True)
def fill_exp_grid(key, channel, i0, j0, rate, out):
    """out[a, b] = Exp(rate) draw at address (channel, i0 + a, j0 + b)."""
    for a in range(out.shape[0]):
        for b in range(out.shape[1]):
            out[a, b] = exp_at(key, channel, i0 + a, j0 + b, rate)


@nb.njit(cache=True)
def fill_exp_line(key, channel, start, rate, out):
    """out[k] = Exp(rate) draw at address (channel, start + k, 0)."""
    for k in range(out.shape[0]):
        out[k] = exp_at(key, channel, start + k, 0, rate)


def derive_seed(seed: int, *labels) -> int:
    """Child seed for a labelled sub-experiment (labels: ints or strings)."""
    h = int(seed) & 0xFFFFFFFFFFFFFFFF
    for lab in labels:
        if isinstance(lab, str):
            for ch in lab.encode():
                h = int(stream_key(h, ch))
            h = int(stream_key(h, 0xFFFF))
        else:
            h = int(stream_key(h, int(lab) & 0xFFFFFFFFFFFFFFFF))
    return h


@dataclass
class Rng:
    """Addressable generator for one replicate.

    ``seed`` identifies the experiment, ``stream`` the replicate.  Lattice
    samplers address draws by coordinate; :meth:`uniform` and
    :meth:`exponential` walk a private sequential channel.
    """

    seed: int
    stream: int = 0
    _next: int = field(default=0, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64 and 0 <= int(self.stream) < 2**64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")
        self.seed = int(self.seed)
        self.stream = int(self.stream)

    @property
    def key(self) -> np.uint64:
        return stream_key(np.uint64(self.seed), np.uint64(self.stream))

    def jump(self, stream: int) -> "Rng":
        """Generator for another replicate of the same experiment."""
        return Rng(self.seed, stream)

    def child(self, *labels) -> "Rng":
        """Independent generator for a labelled sub-experiment."""
        return Rng(derive_seed(self.seed, self.stream, *labels), 0)

    def uniform(self) -> float:
        k = self._next
        self._next += 1
        return float(uniform_at(self.key, SEQUENTIAL, k, 0))

    def exponential(self, rate: float, size: int) -> np.ndarray:
        out = np.empty(size)
        fill_exp_line(self.key, SEQUENTIAL, self._next, float(rate), out)
        self._next += size
        return out
