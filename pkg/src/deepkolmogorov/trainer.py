"""Projected stochastic training of the DKM loss inside ``[-R, R]^P``.

Randomness of a run with seed ``s``:

* initial parameters: uniform streams ``0 .. P-1`` of ``s`` (purpose ``INIT``);
* batch of step ``i`` (fresh batches): key ``(s, i * stride)`` where
  ``stride = (M1 + 1) * M2 + 1`` keeps all batches on disjoint streams;
* frozen dataset: the step-0 batch, reused at every step.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, asdict, fields

import numpy as np

from .dkm import SpaceTimeBox, TrainingBatch, build_batch, loss_and_grad, loss_eval
from .heat_oracle import ExactSolution
from .net_core import Architecture, layer_offsets, param_count
from .rng import PURPOSE_INIT, RngKey, uniforms

__all__ = [
    "TrainConfig",
    "TrainResult",
    "NumericFailure",
    "project_box",
    "init_params",
    "batch_key",
    "train",
    "OptProxy",
    "opt_error_proxy",
]

OPTIMIZERS = ("adam", "sgd")


class NumericFailure(RuntimeError):
    """Raised when the loss or the gradient stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    widths: tuple = (2, 32, 32, 1)
    R: float = 10.0
    optimizer: str = "adam"
    lr: float = 2e-3
    steps: int = 1000
    M1: int = 256
    M2: int = 16
    act: int = 0
    seed: int = 0
    fresh_batch: bool = True
    restarts: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        Architecture(self.widths)
        if self.widths[-1] != 1:
            raise ValueError("the network must have a scalar output")
        if not self.R >= 1:
            raise ValueError(f"box radius R must be >= 1, got {self.R}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not self.lr >= 0 or not math.isfinite(self.lr):
            raise ValueError(f"learning rate must be finite and >= 0, got {self.lr}")
        if self.steps < 1:
            raise ValueError("step count must be >= 1")
        if self.M1 < 1 or self.M2 < 1:
            raise ValueError("M1 and M2 must be >= 1")
        if self.act < 0:
            raise ValueError("activation index must be >= 0")
        if self.restarts < 1:
            raise ValueError("restart count must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("invalid Adam constants")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown train keys {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["widths"] = list(self.widths)
        return doc

    @property
    def arch(self) -> Architecture:
        return Architecture(self.widths)

    def replace(self, **kw) -> "TrainConfig":
        doc = self.to_dict()
        doc.update(kw)
        return TrainConfig.from_dict(doc)


def project_box(theta, R: float) -> np.ndarray:
    """Coordinatewise clamp to ``[-R, R]``."""
    if not R > 0:
        raise ValueError("R must be positive")
    return np.clip(np.asarray(theta, dtype=np.float64), -R, R)


def init_params(arch, R: float, seed: int) -> np.ndarray:
    """Uniform on ``[-r_k, r_k]`` per layer with ``r_k = min(1, R) / sqrt(fan_in)``."""
    a = Architecture.of(arch)
    P = param_count(a)
    u = uniforms(seed, PURPOSE_INIT, np.arange(P, dtype=np.uint64), 1)[:, 0]
    theta = np.empty(P)
    offs = layer_offsets(a)
    for k in range(1, a.depth + 1):
        r = min(1.0, R) / math.sqrt(a.widths[k - 1])
        sl = slice(offs[k - 1], offs[k])
        theta[sl] = r * (2.0 * u[sl] - 1.0)
    return project_box(theta, R)


def batch_key(cfg: TrainConfig, step: int) -> RngKey:
    stride = (cfg.M1 + 1) * cfg.M2 + 1
    return RngKey(cfg.seed, step * stride if cfg.fresh_batch else 0)


@dataclass
class TrainResult:
    theta: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    wall_ms: np.ndarray
    config: TrainConfig
    final_batch_loss: float

    def smoothed_loss(self, window: int = 1000) -> float:
        w = min(window, self.loss.shape[0])
        return float(np.mean(self.loss[-w:]))

    def write_history(self, path) -> None:
        """``step,loss,grad_norm``; deterministic given the configuration."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["step", "loss", "grad_norm"])
            for i in range(self.loss.shape[0]):
                w.writerow([i, repr(float(self.loss[i])), repr(float(self.grad_norm[i]))])

    def write_timing(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["step", "wall_ms"])
            for i in range(self.wall_ms.shape[0]):
                w.writerow([i, f"{self.wall_ms[i]:.3f}"])


def train(
    cfg: TrainConfig,
    sol: ExactSolution,
    box: SpaceTimeBox,
    *,
    theta0=None,
    batch: TrainingBatch | None = None,
    check_box: bool = False,
) -> TrainResult:
    """Run ``cfg.steps`` projected optimizer steps.

    ``history.loss[i]`` is the loss of the step-``i`` batch at the iterate
    before update ``i``. ``batch`` overrides the frozen dataset when
    ``cfg.fresh_batch`` is off. ``check_box`` asserts every iterate lies in
    the box.
    """
    arch = cfg.arch
    if arch.input_dim != sol.d + 1:
        raise ValueError(f"input width {arch.input_dim} != d + 1 = {sol.d + 1}")
    theta = init_params(arch, cfg.R, cfg.seed) if theta0 is None else project_box(theta0, cfg.R)
    if theta.shape != (param_count(arch),):
        raise ValueError("initial parameters do not match the architecture")
    frozen = None
    if not cfg.fresh_batch:
        frozen = batch if batch is not None else build_batch(sol, box, cfg.M1, cfg.M2, batch_key(cfg, 0))
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    losses = np.empty(cfg.steps)
    gnorms = np.empty(cfg.steps)
    wall = np.empty(cfg.steps)
    b1, b2 = cfg.beta1, cfg.beta2
    start = time.perf_counter()
    for i in range(cfg.steps):
        bt = frozen if frozen is not None else build_batch(sol, box, cfg.M1, cfg.M2, batch_key(cfg, i))
        loss, g = loss_and_grad(arch, theta, bt, cfg.act)
        gn = float(np.sqrt(g @ g))
        if not (math.isfinite(loss) and math.isfinite(gn)):
            raise NumericFailure(f"non-finite loss or gradient at step {i}")
        losses[i] = loss
        gnorms[i] = gn
        if cfg.optimizer == "adam":
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** (i + 1))
            vhat = v / (1 - b2 ** (i + 1))
            theta -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
        else:
            theta -= cfg.lr * g
        np.clip(theta, -cfg.R, cfg.R, out=theta)
        if check_box:
            assert np.all(np.abs(theta) <= cfg.R)
        wall[i] = (time.perf_counter() - start) * 1e3
    last = frozen if frozen is not None else build_batch(sol, box, cfg.M1, cfg.M2, batch_key(cfg, cfg.steps))
    return TrainResult(
        theta=theta,
        loss=losses,
        grad_norm=gnorms,
        wall_ms=wall,
        config=cfg,
        final_batch_loss=loss_eval(arch, theta, last, cfg.act),
    )


@dataclass
class OptProxy:
    best_loss: float
    final_losses: list
    proxy: float
    seeds: list
    steps: int

    def to_dict(self) -> dict:
        return asdict(self)


def opt_error_proxy(
    cfg: TrainConfig,
    sol: ExactSolution,
    box: SpaceTimeBox,
    K: int | None = None,
    *,
    seeds=None,
    budget_factor: int = 4,
) -> OptProxy:
    """Restart-based stand-in for ``F(theta) - inf_box F`` on one frozen dataset.

    The dataset is the batch drawn from ``cfg.seed``. Restart ``r`` starts
    from the initialization of ``seeds[r]`` (default: derived from
    ``cfg.seed``) and runs ``budget_factor * cfg.steps`` steps. The best final
    loss stands in for the unobservable infimum; the proxy is the mean final
    loss minus that best value.
    """
    K = cfg.restarts if K is None else K
    if K < 2:
        raise ValueError("need at least 2 restarts")
    if seeds is None:
        seeds = [RngKey(cfg.seed).derive(r).seed for r in range(K)]
    seeds = [int(s) for s in seeds]
    if len(seeds) != K:
        raise ValueError(f"got {len(seeds)} seeds for {K} restarts")
    steps = budget_factor * cfg.steps
    data = build_batch(sol, box, cfg.M1, cfg.M2, RngKey(cfg.seed, 0))
    finals = []
    for s in seeds:
        run_cfg = cfg.replace(seed=s, steps=steps, fresh_batch=False)
        res = train(run_cfg, sol, box, batch=data)
        finals.append(res.final_batch_loss)
    best = min(finals)
    return OptProxy(best_loss=best, final_losses=finals, proxy=float(np.mean(finals)) - best, seeds=seeds, steps=steps)
