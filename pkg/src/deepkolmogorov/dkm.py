"""Sampling, Monte Carlo targets and the empirical loss of the deep Kolmogorov method.

A batch with ``M1`` space-time points and ``M2`` inner samples built from key
``(seed, base)`` uses

* uniform streams ``base + m`` (purpose ``POINTS``) for point ``m``, and
* Brownian streams ``base + m*M2 + n`` (purpose ``BROWNIAN``) for the
  ``n``-th inner sample of point ``m``, with ``1 <= m <= M1``, ``1 <= n <= M2``.

:func:`next_batch_key` returns the first base whose streams are disjoint from
all of these.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .heat_oracle import ExactSolution
from .net_core import Architecture, forward, forward_cache, vjp_theta
from .rng import PURPOSE_BROWNIAN, PURPOSE_POINTS, RngKey, gaussians, uniforms

__all__ = [
    "SpaceTimeBox",
    "TrainingBatch",
    "sample_points",
    "build_batch",
    "brownian_streams",
    "next_batch_key",
    "loss_eval",
    "loss_grad",
    "loss_and_grad",
]


@dataclass(frozen=True)
class SpaceTimeBox:
    """Axis-aligned ``[t0, t1] x prod_i [a_i, b_i]``."""

    t_range: tuple
    x_ranges: tuple

    def __post_init__(self):
        t0, t1 = (float(v) for v in self.t_range)
        xr = tuple((float(a), float(b)) for a, b in self.x_ranges)
        if not t0 < t1:
            raise ValueError(f"empty time range {self.t_range}")
        if not xr:
            raise ValueError("need at least one space coordinate")
        for a, b in xr:
            if not a < b:
                raise ValueError(f"empty space range ({a}, {b})")
        object.__setattr__(self, "t_range", (t0, t1))
        object.__setattr__(self, "x_ranges", xr)

    @classmethod
    def cube(cls, t_range, a: float, b: float, d: int) -> "SpaceTimeBox":
        return cls(tuple(t_range), ((a, b),) * d)

    @classmethod
    def from_dict(cls, doc: dict) -> "SpaceTimeBox":
        unknown = set(doc) - {"t_range", "x_ranges"}
        if unknown:
            raise ValueError(f"unknown box keys {sorted(unknown)}")
        for k in ("t_range", "x_ranges"):
            if k not in doc:
                raise ValueError(f"box needs {k!r}")
        return cls(tuple(doc["t_range"]), tuple(tuple(r) for r in doc["x_ranges"]))

    def to_dict(self) -> dict:
        return {"t_range": list(self.t_range), "x_ranges": [list(r) for r in self.x_ranges]}

    @property
    def d(self) -> int:
        return len(self.x_ranges)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.t_range[0]] + [a for a, _ in self.x_ranges])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.t_range[1]] + [b for _, b in self.x_ranges])

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lower) & (p <= self.upper), axis=1)


@dataclass
class TrainingBatch:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    M2: int
    seed: int
    base: int

    @property
    def M1(self) -> int:
        return self.t.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Network inputs ``(t, x_1, ..., x_d)``, shape ``(M1, d + 1)``."""
        return np.column_stack([self.t, self.x])

    def to_csv(self, path) -> None:
        d = self.x.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["m", "t"] + [f"x{i + 1}" for i in range(d)] + ["y"])
            for m in range(self.M1):
                w.writerow([m + 1, repr(float(self.t[m]))] + [repr(float(v)) for v in self.x[m]] + [repr(float(self.y[m]))])


def sample_points(box: SpaceTimeBox, M1: int, key: RngKey):
    """``M1`` independent uniform points of ``box`` as ``(t, x)`` arrays."""
    if M1 < 1:
        raise ValueError("M1 must be >= 1")
    streams = key.stream + np.arange(1, M1 + 1, dtype=np.uint64)
    u = uniforms(key.seed, PURPOSE_POINTS, streams, box.d + 1)
    p = box.lower + (box.upper - box.lower) * u
    return p[:, 0], p[:, 1:]


def brownian_streams(M1: int, M2: int, base: int = 0) -> np.ndarray:
    """Stream indices ``base + m*M2 + n`` in (m, n) row-major order.

    These are exactly the consecutive integers ``base + M2 + 1 .. base + (M1 + 1) * M2``.
    """
    return np.arange(base + M2 + 1, base + (M1 + 1) * M2 + 1, dtype=np.uint64)


def next_batch_key(key: RngKey, M1: int, M2: int) -> RngKey:
    return key.offset((M1 + 1) * M2 + 1)


def build_batch(sol: ExactSolution, box: SpaceTimeBox, M1: int, M2: int, key: RngKey) -> TrainingBatch:
    """Sample points and average ``M2`` terminal values per point."""
    if M2 < 1:
        raise ValueError("M2 must be >= 1")
    if box.d != sol.d:
        raise ValueError(f"box has d={box.d}, solution has d={sol.d}")
    if box.t_range[0] < 0 or box.t_range[1] > sol.T:
        raise ValueError(f"time range {box.t_range} not inside [0, {sol.T}]")
    t, x = sample_points(box, M1, key)
    z = gaussians(key.seed, PURPOSE_BROWNIAN, brownian_streams(M1, M2, key.stream), sol.d)
    # x + kappa * W_{T-t} with W_{T-t} = sqrt(T-t) Z
    scale = sol.kappa * np.sqrt(sol.T - t)
    ends = z.reshape(M1, M2, sol.d)
    ends *= scale[:, None, None]
    ends += x[:, None, :]
    y = sol.terminal(ends).mean(axis=1)
    return TrainingBatch(t=t, x=x, y=y, M2=M2, seed=key.seed, base=key.stream)


def _check(arch: Architecture, batch: TrainingBatch):
    if arch.input_dim != batch.x.shape[1] + 1:
        raise ValueError(f"input width {arch.input_dim} != d + 1 = {batch.x.shape[1] + 1}")
    if arch.output_dim != 1:
        raise ValueError("the loss needs a scalar-output network")


def loss_eval(arch, theta, batch: TrainingBatch, act: int = 0) -> float:
    """Mean squared distance between network outputs and the Monte Carlo targets."""
    a = Architecture.of(arch)
    _check(a, batch)
    out, _ = forward(a, theta, batch.points, act)
    r = out[:, 0] - batch.y
    return float(np.mean(r * r))


def loss_and_grad(arch, theta, batch: TrainingBatch, act: int = 0):
    a = Architecture.of(arch)
    _check(a, batch)
    pts = batch.points
    out, cache = forward_cache(a, theta, pts, act)
    r = out[:, 0] - batch.y
    g = vjp_theta(a, theta, pts, (2.0 / batch.M1) * r, act, cache=cache)
    return float(np.mean(r * r)), g


def loss_grad(arch, theta, batch: TrainingBatch, act: int = 0) -> np.ndarray:
    return loss_and_grad(arch, theta, batch, act)[1]
