"""Explicit network constructions: the 1-D identity, affine input rescaling,
and exact embedding of one-hidden-layer networks into deeper architectures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net_core import Architecture, Network, forward, param_count, unflatten

__all__ = [
    "ShallowNet",
    "identity_net",
    "embed_shallow_to_deep",
    "embedding_box",
    "affine_rescale",
    "affine_unrescale",
    "max_discrepancy",
]


@dataclass
class ShallowNet:
    """A ReLU network with architecture ``(d, m, 1)``."""

    arch: Architecture
    params: np.ndarray

    def __post_init__(self):
        self.arch = Architecture.of(self.arch)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.arch.depth != 2 or self.arch.output_dim != 1:
            raise ValueError(f"shallow nets have widths (d, m, 1), got {self.arch.widths}")
        if self.params.shape != (param_count(self.arch),):
            raise ValueError(f"expected {param_count(self.arch)} parameters, got {self.params.shape}")

    @classmethod
    def random(cls, d: int, m: int, rng: np.random.Generator, scale: float = 1.0) -> "ShallowNet":
        arch = Architecture((d, m, 1))
        return cls(arch, rng.uniform(-scale, scale, param_count(arch)))

    def __call__(self, x):
        return Network(self.arch, self.params)(x)


def identity_net():
    """``(1, 2, 1)`` with realization ``relu(x) - relu(-x) = x``."""
    return Architecture((1, 2, 1)), np.array([1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0])


def _check_embed(shallow: ShallowNet, deep: Architecture):
    d, m, _ = shallow.arch.widths
    w = deep.widths
    if deep.depth < 2:
        raise ValueError("target architecture needs at least one hidden layer")
    if w[0] != d or w[-1] != 1:
        raise ValueError(f"target {w} must have input width {d} and output width 1")
    if w[1] < m:
        raise ValueError(f"first hidden width {w[1]} is smaller than the shallow width {m}")
    if any(v < 2 for v in w[2:-1]):
        raise ValueError(f"hidden layers after the first need width >= 2, got {w}")


def embed_shallow_to_deep(shallow: ShallowNet, deep_arch) -> np.ndarray:
    """Parameters for ``deep_arch`` realizing exactly the shallow network.

    The first hidden layer copies the shallow one (extra neurons stay zero).
    Layer 2 computes ``(s, -s)`` where ``s`` is the shallow output, every
    further hidden layer maps ``(relu(s), relu(-s))`` to ``(s, -s)`` again, and
    the output layer forms ``relu(s) - relu(-s) = s``. No entry exceeds
    ``max(1, max |theta_i|)`` in magnitude.
    """
    deep = Architecture.of(deep_arch)
    _check_embed(shallow, deep)
    if deep == shallow.arch:
        return shallow.params.copy()
    theta = np.zeros(param_count(deep))
    layers = unflatten(deep, theta)
    (W1, b1), (v, c) = unflatten(shallow.arch, shallow.params)
    m = W1.shape[0]
    layers[0][0][:m] = W1
    layers[0][1][:m] = b1
    L = deep.depth
    # layer 2: the shallow output and its negative
    W2, b2 = layers[1]
    if L == 2:
        W2[0, :m] = v[0]
        b2[0] = c[0]
        return theta
    W2[0, :m], W2[1, :m] = v[0], -v[0]
    b2[0], b2[1] = c[0], -c[0]
    pair = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for k in range(2, L - 1):
        layers[k][0][:2, :2] = pair
    layers[L - 1][0][0, :2] = (1.0, -1.0)
    return theta


def embedding_box(shallow: ShallowNet) -> float:
    """Half-width of the coarser reference box ``||theta|| + 1``."""
    return float(np.linalg.norm(shallow.params) + 1.0)


def _shift(W: np.ndarray, a: float, b: float) -> np.ndarray:
    return (a + b) / (b - a) * W.sum(axis=1)


def affine_rescale(shallow: ShallowNet, a: float, b: float) -> ShallowNet:
    """Move the domain from ``[-1, 1]^d`` to ``[a, b]^d``.

    The result evaluated at ``y`` equals the input evaluated at
    ``x = (2y - (a+b)) / (b - a)``. Only first-layer entries change: weights
    are scaled by ``2/(b-a)`` and bias ``i`` loses ``(a+b)/(b-a) * sum_j W_ij``.
    """
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    theta = shallow.params.copy()
    (W, bias), _ = unflatten(shallow.arch, theta)
    bias -= _shift(W, a, b)
    W *= 2.0 / (b - a)
    return ShallowNet(shallow.arch, theta)


def affine_unrescale(shallow: ShallowNet, a: float, b: float) -> ShallowNet:
    """Inverse of :func:`affine_rescale`: move the domain from ``[a, b]^d`` back to ``[-1, 1]^d``."""
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    theta = shallow.params.copy()
    (W, bias), _ = unflatten(shallow.arch, theta)
    W *= (b - a) / 2.0
    bias += _shift(W, a, b)
    return ShallowNet(shallow.arch, theta)


def max_discrepancy(arch_a, theta_a, arch_b, theta_b, x) -> float:
    """Largest absolute difference of two realizations over the rows of ``x``."""
    ya, _ = forward(arch_a, theta_a, x)
    yb, _ = forward(arch_b, theta_b, x)
    return float(np.max(np.abs(ya - yb)))
