"""Counter-based random streams.

Every draw is a pure function of ``(seed, purpose, stream, coordinate)``, so
batches can be regenerated in any order and any subset without replaying a
sequential generator. The core is Philox4x32-10 (Salmon et al., Random123),
compiled with numba.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "RngKey",
    "PURPOSE_BROWNIAN",
    "PURPOSE_POINTS",
    "PURPOSE_INIT",
    "PURPOSE_SWEEP",
    "philox4x32",
    "gaussians",
    "uniforms",
]

# Purpose tags occupy counter word 1 so that streams used for different
# things never collide even when their stream indices coincide.
PURPOSE_BROWNIAN = 1
PURPOSE_POINTS = 2
PURPOSE_INIT = 3
PURPOSE_SWEEP = 4

_MASK32 = np.uint64(0xFFFFFFFF)
_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RngKey:
    """A (seed, stream) pair addressing one family of random streams."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _U64_MASK):
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not (0 <= self.stream <= _U64_MASK):
            raise ValueError(f"stream must fit in 64 unsigned bits, got {self.stream}")

    def offset(self, delta: int) -> "RngKey":
        return RngKey(self.seed, self.stream + int(delta))

    def derive(self, tag: int) -> "RngKey":
        """Independent key for a sub-experiment (restart, sweep cell, ...)."""
        return RngKey(_splitmix64(self.seed ^ _splitmix64(int(tag) + 0x632BE59BD9B4E019)), 0)


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _U64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    return z ^ (z >> 31)


@nb.njit(cache=True, nogil=True)
def _philox(c0, c1, c2, c3, k0, k1):
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    w0 = np.uint64(0x9E3779B9)
    w1 = np.uint64(0xBB67AE85)
    mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for _ in range(10):
        p0 = m0 * c0
        p1 = m1 * c2
        n0 = ((p1 >> s32) ^ c1 ^ k0) & mask
        n2 = ((p0 >> s32) ^ c3 ^ k1) & mask
        c1 = p1 & mask
        c3 = p0 & mask
        c0 = n0
        c2 = n2
        k0 = (k0 + w0) & mask
        k1 = (k1 + w1) & mask
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def _to_unit(hi, lo):
    # 53 random bits, mapped to the open interval (0, 1)
    v = ((hi << np.uint64(32)) | lo) >> np.uint64(11)
    return (np.float64(v) + 0.5) * 1.1102230246251565e-16


@nb.njit(cache=True, nogil=True, inline="always")
def _normal_quantile(p):
    # Wichura's AS241 (PPND16), relative accuracy about 1e-16
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q*q
        return q * (((((((2509.0809287301226727*r + 33430.575583588128105)*r + 67265.770927008700853)*r
                 + 45921.953931549871457)*r + 13731.693765509461125)*r + 1971.5909503065514427)*r + 133.14166789178437745)*r
                 + 3.387132872796366608) / (((((((5226.495278852545925*r + 28729.085735721942674)*r + 39307.89580009271061)*r
                 + 21213.794301586595867)*r + 5394.1960214247511077)*r + 687.1870074920579083)*r + 42.313330701600911252)*r + 1.0)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        v = (((((((7.7454501427834140764e-4*r + 0.0227238449892691845833)*r + 0.24178072517745061177)*r
              + 1.27045825245236838258)*r + 3.64784832476320460504)*r + 5.7694972214606914055)*r + 4.6303378461565452959)*r
              + 1.42343711074968357734) / (((((((1.05075007164441684324e-9*r + 5.475938084995344946e-4)*r
              + 0.0151986665636164571966)*r + 0.14810397642748007459)*r + 0.68976733498510000455)*r + 1.6763848301838038494)*r
              + 2.05319162663775882187)*r + 1.0)
    else:
        r -= 5.0
        v = (((((((2.01033439929228813265e-7*r + 2.71155556874348757815e-5)*r + 0.0012426609473880784386)*r
              + 0.026532189526576123093)*r + 0.29656057182850489123)*r + 1.7848265399172913358)*r + 5.4637849111641143699)*r
              + 6.6579046435011037772) / (((((((2.04426310338993978564e-15*r + 1.4215117583164458887e-7)*r
              + 1.8463183175100546818e-5)*r + 7.868691311456132591e-4)*r + 0.0148753612908506148525)*r
              + 0.13692988092273580531)*r + 0.59983220655588793769)*r + 1.0)
    return -v if q < 0 else v

_TILE = 256


@nb.njit(cache=True, nogil=True)
def _philox_tile(c0, c1, c2, c3, m, k0, k1):
    """Philox4x32-10 on the first ``m`` lanes of four uint32 counter arrays, in place.

    Round-major order over a tile lets the compiler vectorize across lanes.
    """
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    w0 = np.uint64(0x9E3779B9)
    w1 = np.uint64(0xBB67AE85)
    mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for _ in range(10):
        for j in range(m):
            p0 = m0 * np.uint64(c0[j])
            p1 = m1 * np.uint64(c2[j])
            n0 = np.uint32((p1 >> s32) ^ np.uint64(c1[j]) ^ k0)
            n2 = np.uint32((p0 >> s32) ^ np.uint64(c3[j]) ^ k1)
            c1[j] = np.uint32(p1 & mask)
            c3[j] = np.uint32(p0 & mask)
            c0[j] = n0
            c2[j] = n2
        k0 = (k0 + w0) & mask
        k1 = (k1 + w1) & mask


@nb.njit(cache=True, nogil=True)
def _fill(seed, purpose, streams, d, out, normal):
    # coordinates 2k and 2k+1 of stream i come from block counter (k, purpose, i_lo, i_hi)
    k0 = np.uint64(seed) & np.uint64(0xFFFFFFFF)
    k1 = np.uint64(seed) >> np.uint64(32)
    c0 = np.empty(_TILE, np.uint32)
    c1 = np.empty(_TILE, np.uint32)
    c2 = np.empty(_TILE, np.uint32)
    c3 = np.empty(_TILE, np.uint32)
    n = streams.shape[0]
    for start in range(0, n, _TILE):
        m = min(_TILE, n - start)
        for blk in range((d + 1) // 2):
            for j in range(m):
                s = np.uint64(streams[start + j])
                c0[j] = np.uint32(blk)
                c1[j] = np.uint32(purpose)
                c2[j] = np.uint32(s & np.uint64(0xFFFFFFFF))
                c3[j] = np.uint32(s >> np.uint64(32))
            _philox_tile(c0, c1, c2, c3, m, k0, k1)
            for j in range(m):
                u = _to_unit(np.uint64(c0[j]), np.uint64(c1[j]))
                out[start + j, 2 * blk] = _normal_quantile(u) if normal else u
                if 2 * blk + 1 < d:
                    u = _to_unit(np.uint64(c2[j]), np.uint64(c3[j]))
                    out[start + j, 2 * blk + 1] = _normal_quantile(u) if normal else u


def philox4x32(counter, key):
    """Raw Philox4x32-10 block: four 32-bit counter words, two key words."""
    c = [np.uint64(int(w) & 0xFFFFFFFF) for w in counter]
    k = [np.uint64(int(w) & 0xFFFFFFFF) for w in key]
    return tuple(int(w) for w in _philox(c[0], c[1], c[2], c[3], k[0], k[1]))


def _as_streams(streams) -> np.ndarray:
    s = np.ascontiguousarray(np.atleast_1d(np.asarray(streams)), dtype=np.uint64)
    return s


def gaussians(seed: int, purpose: int, streams, d: int) -> np.ndarray:
    """Standard normal draws, one row of ``d`` coordinates per stream index.

    Coordinates ``2k`` and ``2k+1`` of a stream come from the two 64-bit halves
    of Philox block ``k``, each pushed through the normal quantile function.
    """
    s = _as_streams(streams)
    out = np.empty((s.shape[0], d))
    _fill(np.uint64(seed), np.uint64(purpose), s, d, out, True)
    return out


def uniforms(seed: int, purpose: int, streams, d: int) -> np.ndarray:
    """Uniform draws on the open unit interval, shape ``(len(streams), d)``."""
    s = _as_streams(streams)
    out = np.empty((s.shape[0], d))
    _fill(np.uint64(seed), np.uint64(purpose), s, d, out, False)
    return out
