"""Deterministic random number generation.

A counter-based stream built on the SplitMix64 mixer (Vigna's companion
generator of the xoshiro suite): output i of a stream with seed s is
``mix64(s + (i+1)*GOLDEN)``.  Because each output depends only on (seed,
position), blocks of any size can be produced with vectorized uint64
arithmetic; uniform draws are bit-identical however the stream is
chunked, while Gaussian draws (Box-Muller) and gamma draws
(Marsaglia-Tsang rejection) are bit-identical given the same call
sequence, which is what solver-trace replayability needs.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_INV_2_64 = 1.0 / 2.0**64


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 input (vectorized; array ops wrap
    silently, scalar callers wrap themselves in errstate)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded, positioned stream of deterministic variates."""

    def __init__(self, seed: int, position: int = 0):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._pos = np.uint64(position)

    @property
    def seed(self) -> int:
        return int(self._seed)

    @property
    def position(self) -> int:
        return int(self._pos)

    def spawn(self, key: int) -> "Rng":
        """Independent child stream; key selects the child deterministically."""
        with np.errstate(over="ignore"):
            child = mix64(self._seed ^ mix64(np.uint64(key & 0xFFFFFFFFFFFFFFFF) * _GOLDEN + _GOLDEN))
        return Rng(int(child))

    def _raw(self, n: int) -> np.ndarray:
        idx = self._pos + np.arange(1, n + 1, dtype=np.uint64)
        out = mix64(self._seed + idx * _GOLDEN)
        self._pos = self._pos + np.uint64(n)
        return out

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform on [0, 1)."""
        n, shape = _size(shape)
        u = self._raw(n).astype(np.float64) * _INV_2_64
        return _reshape(u, shape)

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard normal via Box-Muller (pairs; odd counts drop the last)."""
        n, shape = _size(shape)
        m = (n + 1) // 2
        raw = self._raw(2 * m).astype(np.float64)
        # u1 in (0, 1] so log is finite; u2 in [0, 1)
        u1 = (raw[:m] + 1.0) * _INV_2_64
        u2 = raw[m:] * _INV_2_64
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(ang), r * np.sin(ang)])[:n]
        return _reshape(z, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray | int:
        """Uniform integers in [low, high] inclusive."""
        if high < low:
            raise ValueError("empty integer range")
        n, shape = _size(shape)
        span = high - low + 1
        vals = low + np.floor(self.uniform(n) * span).astype(np.int64)
        # guard the measure-zero u == 1.0 edge after float rounding
        np.minimum(vals, high, out=vals)
        return _reshape(vals, shape)

    def gamma(self, shape_param: float, shape=None) -> np.ndarray | float:
        """Gamma(shape_param, scale=1) via Marsaglia-Tsang, shape_param >= 1."""
        if shape_param < 1.0:
            raise ValueError("gamma sampling implemented for shape >= 1")
        n, shape = _size(shape)
        d = shape_param - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        out = np.empty(n, dtype=np.float64)
        todo = np.arange(n)
        while todo.size:
            x = np.asarray(self.normal(todo.size), dtype=np.float64).reshape(-1)
            u = np.asarray(self.uniform(todo.size), dtype=np.float64).reshape(-1)
            v = (1.0 + c * x) ** 3
            ok = v > 0
            accept = ok & (np.log(np.maximum(u, 1e-300)) <
                           0.5 * x * x + d - d * np.where(ok, v, 1.0)
                           + d * np.log(np.where(ok, v, 1.0)))
            out[todo[accept]] = d * v[accept]
            todo = todo[~accept]
        return _reshape(out, shape)


def _size(shape):
    if shape is None:
        return 1, None
    if np.isscalar(shape):
        return int(shape), (int(shape),)
    n = 1
    for s in shape:
        n *= int(s)
    return n, tuple(int(s) for s in shape)


def _reshape(arr, shape):
    if shape is None:
        return float(arr[0]) if arr.dtype == np.float64 else int(arr[0])
    return arr.reshape(shape)
