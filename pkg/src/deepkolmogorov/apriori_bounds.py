"""Parameter-explicit a priori bounds for realizations and their gradients,
with a sampling checker that compares them against realized values.

Notation: ``M(theta) = max(1, max_j |theta_j|)``, ``X = max(1, |a|, |b|)``,
``W = max(l_0, ..., l_{L-1})``.

* growth (layer ``k``): ``X^e * M_k^(k e) * (1 + 2 max(c,1) W_k)^(k e)``
  with ``e = max(1, q^(k-1))`` and ``M_k``, ``W_k`` restricted to the first
  ``k`` layers;
* parameter-Lipschitz: ``X * [(3 + |A(0)|) max(c,1) W]^L * M(theta, vartheta)^L * max|theta - vartheta|``;
* gradient: ``X * (3 + |A(0)|)^L * [W * M(theta) * max(1, sup|A'|)]^L``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .net_core import (
    Architecture,
    forward,
    grad_theta_norm,
    layer_offsets,
    param_count,
)

__all__ = [
    "BoundContext",
    "growth_bound",
    "lipschitz_bound",
    "grad_bound",
    "sample_box",
    "BoundReport",
    "check_bounds",
]


@dataclass(frozen=True)
class BoundContext:
    """Hypotheses ``|A(x)| <= c (1 + |x|^q)`` on the box ``[a, b]^d`` at layer ``k``."""

    a: float = -1.0
    b: float = 1.0
    c: float = 1.0
    q: float = 1.0
    k: int = 1

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if self.c < 0 or self.q < 0:
            raise ValueError("c and q must be nonnegative")
        if self.k < 1:
            raise ValueError("layer index k must be >= 1")


def _reach(a: float, b: float) -> float:
    return max(1.0, abs(a), abs(b))


def growth_bound(arch, theta, ctx: BoundContext) -> float:
    """Upper bound for ``max_i sup_x |pre-activation_i|`` at layer ``ctx.k``."""
    A = Architecture.of(arch)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (param_count(A),):
        raise ValueError("parameter vector does not match the architecture")
    k = ctx.k
    if k > A.depth:
        raise ValueError(f"layer index {k} exceeds depth {A.depth}")
    e = max(1.0, ctx.q ** (k - 1))
    dk = layer_offsets(A)[k]
    m = max(1.0, float(np.max(np.abs(theta[:dk]))))
    w = max(A.widths[:k])
    return _reach(ctx.a, ctx.b) ** e * m ** (k * e) * (1 + 2 * max(ctx.c, 1.0) * w) ** (k * e)


def lipschitz_bound(arch, theta, vartheta, a: float, b: float, act_c: float = 1.0, act_at_zero: float = 0.0) -> float:
    """Upper bound for ``sup_x |N^theta(x) - N^vartheta(x)|`` over ``[a, b]^d``."""
    A = Architecture.of(arch)
    theta = np.asarray(theta, dtype=np.float64)
    vartheta = np.asarray(vartheta, dtype=np.float64)
    if theta.shape != vartheta.shape:
        raise ValueError(f"parameter vectors differ in length: {theta.shape} vs {vartheta.shape}")
    if theta.shape != (param_count(A),):
        raise ValueError("parameter vectors do not match the architecture")
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    diff = float(np.max(np.abs(theta - vartheta)))
    if diff == 0.0:
        return 0.0
    L = A.depth
    w = max(A.widths[:-1])
    m = max(1.0, float(np.max(np.abs(theta))), float(np.max(np.abs(vartheta))))
    base = (3 + abs(act_at_zero)) * max(act_c, 1.0) * w
    return _reach(a, b) * base**L * m**L * diff


def grad_bound(arch, theta, a: float, b: float, act_deriv_sup: float = 1.0, act_at_zero: float = 0.0) -> float:
    """Upper bound for ``sup_x ||grad_theta N^theta(x)||`` over ``[a, b]^d``."""
    A = Architecture.of(arch)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (param_count(A),):
        raise ValueError("parameter vector does not match the architecture")
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    L = A.depth
    w = max(A.widths[:-1])
    m = max(1.0, float(np.max(np.abs(theta))))
    return _reach(a, b) * (3 + abs(act_at_zero)) ** L * (w * m * max(1.0, act_deriv_sup)) ** L


def sample_box(d: int, a: float, b: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """At least ``n`` points of ``[a, b]^d``: a tensor grid when it is not too
    coarse, all corners when ``2^d <= n``, and uniform points."""
    parts = [rng.uniform(a, b, size=(n, d))]
    per_axis = int(math.floor(n ** (1.0 / d)))
    if per_axis >= 3:
        axes = [np.linspace(a, b, per_axis)] * d
        parts.append(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d))
    elif 2**d <= n:
        corners = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
        parts.append(np.where(corners == 1, b, a).astype(np.float64))
    return np.concatenate(parts)


@dataclass
class BoundReport:
    trials: int
    seed: int
    violations: dict
    worst_ratio: dict
    points_per_case: int
    settings: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["worst_ratio_overall"] = max(self.worst_ratio.values())
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _random_case(rng: np.random.Generator, max_width: int, theta_range: float):
    L = int(rng.integers(2, 5))
    widths = [int(rng.integers(1, max_width + 1)) for _ in range(L)] + [1]
    A = Architecture(tuple(widths))
    theta = rng.uniform(-theta_range, theta_range, param_count(A))
    return A, theta


def check_bounds(
    trials: int,
    seed: int,
    *,
    points: int = 10_000,
    a: float = -1.0,
    b: float = 1.0,
    max_width: int = 16,
    theta_range: float = 2.0,
    smooth_index: int = 1,
) -> BoundReport:
    """Compare the three bounds with sampled realized values on random networks.

    Case ``i`` draws from ``numpy.random.default_rng([seed, i])`` so results do
    not depend on evaluation order. Growth and Lipschitz use ReLU (c = 1,
    q = 1, A(0) = 0); the gradient bound uses the smooth activation
    ``smooth_index`` (derivative bounded by 1, A(0) = 0).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if smooth_index < 1:
        raise ValueError("the gradient bound needs a C^1 activation (index >= 1)")
    viol = {"growth": 0, "lipschitz": 0, "gradient": 0}
    worst = {"growth": 0.0, "lipschitz": 0.0, "gradient": 0.0}
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        A, theta = _random_case(rng, max_width, theta_range)
        x = sample_box(A.input_dim, a, b, points, rng)

        _, pre = forward(A, theta, x, 0)
        bad = False
        for k in range(1, A.depth + 1):
            realized = float(np.max(np.abs(pre[k - 1])))
            bound = growth_bound(A, theta, BoundContext(a, b, 1.0, 1.0, k))
            worst["growth"] = max(worst["growth"], realized / bound)
            bad |= realized > bound
        viol["growth"] += bad

        # perturbations from tiny to order one
        scale = 10.0 ** rng.uniform(-6, 0)
        vartheta = theta + rng.uniform(-scale, scale, theta.shape)
        out_t, _ = forward(A, theta, x, 0)
        out_v, _ = forward(A, vartheta, x, 0)
        realized = float(np.max(np.abs(out_t - out_v)))
        bound = lipschitz_bound(A, theta, vartheta, a, b, 1.0, 0.0)
        if bound > 0:
            worst["lipschitz"] = max(worst["lipschitz"], realized / bound)
        viol["lipschitz"] += realized > bound

        realized = float(np.max(grad_theta_norm(A, theta, x, smooth_index)))
        bound = grad_bound(A, theta, a, b, 1.0, 0.0)
        worst["gradient"] = max(worst["gradient"], realized / bound)
        viol["gradient"] += realized > bound
    return BoundReport(
        trials=trials,
        seed=seed,
        violations={k: int(v) for k, v in viol.items()},
        worst_ratio=worst,
        points_per_case=points,
        settings={"a": a, "b": b, "max_width": max_width, "theta_range": theta_range, "smooth_index": smooth_index},
    )
