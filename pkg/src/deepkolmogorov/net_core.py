"""Fully connected networks stored as one flat parameter vector.

Layer ``k`` (1-based) owns the slice starting at ``offsets[k-1]``: first the
``widths[k] x widths[k-1]`` weight matrix in row-major order (entry for output
``i``, input ``j`` at ``(i-1)*widths[k-1] + j``), then ``widths[k]`` biases.
The activation is applied to every hidden pre-activation and never to the
output layer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Architecture",
    "Network",
    "param_count",
    "layer_offsets",
    "weight_index",
    "bias_index",
    "unflatten",
    "smooth_activation",
    "forward",
    "grad_theta",
    "grad_theta_norm",
    "grad_input",
    "vjp_theta",
    "forward_cache",
]


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``(l_0, ..., l_L)`` with ``L >= 1``."""

    widths: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(v) for v in self.widths)
        if len(w) < 2:
            raise ValueError(f"need at least an input and an output width, got {w}")
        if any(v < 1 for v in w):
            raise ValueError(f"all widths must be >= 1, got {w}")
        object.__setattr__(self, "widths", w)

    @classmethod
    def of(cls, arch: "Architecture | Sequence[int]") -> "Architecture":
        return arch if isinstance(arch, Architecture) else cls(tuple(arch))

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    def __len__(self):
        return len(self.widths)

    def __iter__(self):
        return iter(self.widths)


def param_count(arch) -> int:
    w = Architecture.of(arch).widths
    return sum(w[i] * (w[i - 1] + 1) for i in range(1, len(w)))


def layer_offsets(arch) -> tuple[int, ...]:
    """Cumulative parameter counts ``(d_0, ..., d_L)`` with ``d_0 = 0``."""
    w = Architecture.of(arch).widths
    out = [0]
    for i in range(1, len(w)):
        out.append(out[-1] + w[i] * (w[i - 1] + 1))
    return tuple(out)


def weight_index(arch, k: int, i: int, j: int) -> int:
    """0-based flat position of the weight from input ``j`` to output ``i`` of layer ``k``.

    All three indices are 1-based, matching the usual mathematical layout.
    """
    a = Architecture.of(arch)
    w = a.widths
    if not (1 <= k <= a.depth and 1 <= i <= w[k] and 1 <= j <= w[k - 1]):
        raise IndexError(f"no weight ({k}, {i}, {j}) in architecture {w}")
    return layer_offsets(a)[k - 1] + (i - 1) * w[k - 1] + j - 1


def bias_index(arch, k: int, i: int) -> int:
    a = Architecture.of(arch)
    w = a.widths
    if not (1 <= k <= a.depth and 1 <= i <= w[k]):
        raise IndexError(f"no bias ({k}, {i}) in architecture {w}")
    return layer_offsets(a)[k - 1] + w[k] * w[k - 1] + i - 1


def unflatten(arch, theta) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W_k, b_k)`` into ``theta``; no copies are made."""
    a = Architecture.of(arch)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != param_count(a):
        raise ValueError(
            f"parameter vector has shape {theta.shape}, expected ({param_count(a)},) for {a.widths}"
        )
    w = a.widths
    offs = layer_offsets(a)
    layers = []
    for k in range(1, len(w)):
        start = offs[k - 1]
        nw = w[k] * w[k - 1]
        W = theta[start : start + nw].reshape(w[k], w[k - 1])
        b = theta[start + nw : start + nw + w[k]]
        layers.append((W, b))
    return layers


def smooth_activation(n: int, x):
    """Value and derivative of the activation with index ``n``.

    ``n = 0`` is ReLU with derivative ``1{x > 0}``. For ``n >= 1`` this is the
    C^1 piecewise quadratic smoothing

        0             for x <= 0
        n x^2 / 2     for 0 <= x <= 1/n
        x - 1/(2n)    for x >= 1/n

    whose derivative is bounded by 1 and which converges to ReLU as n grows.
    """
    if n < 0:
        raise ValueError(f"activation index must be >= 0, got {n}")
    x = np.asarray(x, dtype=np.float64)
    if n == 0:
        return np.maximum(x, 0.0), (x > 0).astype(np.float64)
    inv = 1.0 / n
    value = np.where(x <= 0, 0.0, np.where(x <= inv, 0.5 * n * x * x, x - 0.5 * inv))
    deriv = np.where(x <= 0, 0.0, np.where(x <= inv, n * x, 1.0))
    return value, deriv


def _activate(n, z):
    if n == 0:
        return np.maximum(z, 0.0)
    return smooth_activation(n, z)[0]


def _as_batch(a: Architecture, x):
    """Return ``(batch, single)``; a 1-D array is one input unless ``l_0 = 1``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x, single = x.reshape(1, 1), True
    elif x.ndim == 1 and x.shape[0] == a.input_dim:
        x, single = x.reshape(1, -1), True
    elif x.ndim == 1 and a.input_dim == 1:
        x, single = x.reshape(-1, 1), False
    elif x.ndim == 2:
        single = False
    else:
        raise ValueError(f"cannot interpret input of shape {x.shape} for input width {a.input_dim}")
    if x.shape[1] != a.input_dim:
        raise ValueError(f"inputs have {x.shape[1]} columns, architecture expects {a.input_dim}")
    return x, single


def _run(a: Architecture, layers, xb, act):
    """Pre-activations of every layer and the inputs fed to every layer."""
    h = xb
    pre, acts = [], [xb]
    for k, (W, b) in enumerate(layers, start=1):
        z = h @ W.T + b
        pre.append(z)
        if k < a.depth:
            h = _activate(act, z)
            acts.append(h)
    return pre, acts


def forward(arch, theta, x, act: int = 0):
    """Evaluate the realization.

    ``x`` is one input of length ``l_0`` or a batch of shape ``(N, l_0)``.
    Returns ``(output, pre_activations)`` where ``pre_activations[k-1]`` holds
    the layer-``k`` pre-activations (the last one equals ``output``).
    """
    a = Architecture.of(arch)
    layers = unflatten(a, theta)
    xb, single = _as_batch(a, x)
    pre, _ = _run(a, layers, xb, act)
    out = pre[-1]
    if single:
        return out[0], [z[0] for z in pre]
    return out, pre


def _derivative(act, z):
    if act == 0:
        return z > 0
    return smooth_activation(act, z)[1]


def _backward(a, layers, xb, pre, act, cot, acts=None):
    """Yield per-layer (delta, layer input) pairs, last layer first."""
    if acts is None:
        acts = [xb] + [_activate(act, pre[k - 1]) for k in range(1, a.depth)]
    delta = cot
    for k in range(a.depth, 0, -1):
        yield k, delta, acts[k - 1]
        if k > 1:
            W = layers[k - 1][0]
            delta = (delta @ W) * _derivative(act, pre[k - 2])


def forward_cache(arch, theta, x, act: int = 0):
    """Batch evaluation that also keeps each layer's input for a later :func:`vjp_theta`."""
    a = Architecture.of(arch)
    xb, _ = _as_batch(a, x)
    pre, acts = _run(a, unflatten(a, theta), xb, act)
    return pre[-1], (pre, acts)


def vjp_theta(arch, theta, x, cotangent, act: int = 0, pre=None, cache=None):
    """``sum_m cotangent[m] . d N(x_m) / d theta`` for a batch of inputs.

    ``cache`` from :func:`forward_cache` (or ``pre`` from :func:`forward`)
    skips the forward pass.
    """
    a = Architecture.of(arch)
    layers = unflatten(a, theta)
    xb, _ = _as_batch(a, x)
    acts = None
    if cache is not None:
        pre, acts = cache
    elif pre is None:
        _, pre = forward(a, theta, xb, act)
    cot = np.asarray(cotangent, dtype=np.float64).reshape(xb.shape[0], a.output_dim)
    g = np.empty(param_count(a))
    offs = layer_offsets(a)
    w = a.widths
    for k, delta, h in _backward(a, layers, xb, pre, act, cot, acts):
        start = offs[k - 1]
        nw = w[k] * w[k - 1]
        g[start : start + nw] = (delta.T @ h).ravel()
        g[start + nw : offs[k]] = delta.sum(axis=0)
    return g


def grad_theta(arch, theta, x, act: int = 0):
    """Parameter gradient of a scalar-output realization.

    Returns shape ``(d(l),)`` for a single input and ``(N, d(l))`` for a
    batch. The ReLU derivative at 0 is taken to be 0.
    """
    a = Architecture.of(arch)
    if a.output_dim != 1:
        raise ValueError("grad_theta needs a scalar output (l_L = 1)")
    layers = unflatten(a, theta)
    xb, single = _as_batch(a, x)
    _, pre = forward(a, theta, xb, act)
    N = xb.shape[0]
    G = np.empty((N, param_count(a)))
    offs = layer_offsets(a)
    w = a.widths
    for k, delta, h in _backward(a, layers, xb, pre, act, np.ones((N, 1))):
        start = offs[k - 1]
        nw = w[k] * w[k - 1]
        G[:, start : start + nw] = (delta[:, :, None] * h[:, None, :]).reshape(N, nw)
        G[:, start + nw : offs[k]] = delta
    return G[0] if single else G


def grad_theta_norm(arch, theta, x, act: int = 0) -> np.ndarray:
    """Euclidean norms of per-input parameter gradients without forming them.

    Layer ``k`` contributes ``|delta_k|^2 (|h_{k-1}|^2 + 1)`` since its weight
    gradient is the outer product ``delta_k h_{k-1}^T``.
    """
    a = Architecture.of(arch)
    if a.output_dim != 1:
        raise ValueError("grad_theta_norm needs a scalar output (l_L = 1)")
    layers = unflatten(a, theta)
    xb, single = _as_batch(a, x)
    _, pre = forward(a, theta, xb, act)
    sq = np.zeros(xb.shape[0])
    for _k, delta, h in _backward(a, layers, xb, pre, act, np.ones((xb.shape[0], 1))):
        sq += np.sum(delta * delta, axis=1) * (np.sum(h * h, axis=1) + 1.0)
    n = np.sqrt(sq)
    return n[0] if single else n


def grad_input(arch, theta, x, act: int = 0):
    """Gradient of a scalar-output realization with respect to its input."""
    a = Architecture.of(arch)
    if a.output_dim != 1:
        raise ValueError("grad_input needs a scalar output (l_L = 1)")
    layers = unflatten(a, theta)
    xb, single = _as_batch(a, x)
    _, pre = forward(a, theta, xb, act)
    delta = None
    for k, delta, _h in _backward(a, layers, xb, pre, act, np.ones((xb.shape[0], 1))):
        pass
    gx = delta @ layers[0][0]
    return gx[0] if single else gx


@dataclass
class Network:
    """An architecture paired with a parameter vector and an activation index."""

    arch: Architecture
    params: np.ndarray
    act: int = 0
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.arch = Architecture.of(self.arch)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self._check and self.params.shape != (param_count(self.arch),):
            raise ValueError(
                f"expected {param_count(self.arch)} parameters for {self.arch.widths}, "
                f"got shape {self.params.shape}"
            )

    def __call__(self, x):
        out, _ = forward(self.arch, self.params, x, self.act)
        if self.arch.output_dim == 1:
            return out[..., 0]
        return out

    def grad_input(self, x):
        return grad_input(self.arch, self.params, x, self.act)

    def to_dict(self) -> dict:
        return {"widths": list(self.arch.widths), "params": [float(v) for v in self.params]}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc: dict, act: int = 0) -> "Network":
        missing = {"widths", "params"} - set(doc)
        if missing:
            raise ValueError(f"network document lacks {sorted(missing)}")
        return cls(Architecture(tuple(doc["widths"])), np.array(doc["params"], dtype=np.float64), act)

    @classmethod
    def from_json(cls, text_or_path, act: int = 0) -> "Network":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text), act)
