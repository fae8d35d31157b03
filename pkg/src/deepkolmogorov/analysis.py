"""Error measurement and reporting: L2 error by Monte Carlo quadrature, the
generalization-gap rate, a Sobolev-type sup-norm estimate, width sweeps and
the error-decomposition report."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict, field

import numpy as np
from scipy import stats

from .dkm import SpaceTimeBox, build_batch
from .heat_oracle import ExactSolution
from .net_core import Architecture, Network, forward, grad_input, param_count
from .rates import RateFit, rate_fit
from .rng import PURPOSE_SWEEP, RngKey, uniforms
from .trainer import OptProxy, TrainConfig, TrainResult, train

__all__ = [
    "PURPOSE_QUAD",
    "quadrature_nodes",
    "l2_error",
    "relative_l2_error",
    "rate_fit",
    "GapReport",
    "generalization_gap",
    "sobolev_sup_estimate",
    "WidthSweep",
    "width_sweep",
    "DecompositionReport",
    "decomposition_report",
    "write_sweep_csv",
    "plot_sweep_svg",
]

PURPOSE_QUAD = 5

SQRT_E = math.sqrt(math.e)


def _as_model(model, act: int = 0):
    if isinstance(model, tuple):
        arch, theta = model
        return Network(arch, theta, act)
    return model


def quadrature_nodes(box: SpaceTimeBox, n: int, key: RngKey) -> np.ndarray:
    """``n`` uniform nodes ``(t, x)`` in the box, shape ``(n, d + 1)``."""
    u = uniforms(key.seed, PURPOSE_QUAD, key.stream + np.arange(n, dtype=np.uint64), box.d + 1)
    return box.lower + (box.upper - box.lower) * u


def _vol_mean(values: np.ndarray, vol: float):
    n = values.shape[0]
    est = vol * float(np.mean(values))
    se = vol * float(np.std(values, ddof=1)) / math.sqrt(n)
    return est, se


def l2_error(model, sol: ExactSolution, box: SpaceTimeBox, n_points: int = 2**16, key: RngKey = RngKey(0), act: int = 0):
    """Monte Carlo estimate of ``int_box |u - N|^2`` and its standard error.

    ``model`` is a callable on rows ``(t, x)`` or an ``(arch, theta)`` pair.
    """
    if n_points < 100:
        raise ValueError("need at least 100 quadrature points")
    f = _as_model(model, act)
    p = quadrature_nodes(box, n_points, key)
    r = sol(p[:, 0], p[:, 1:]) - np.asarray(f(p), dtype=np.float64).reshape(-1)
    return _vol_mean(r * r, box.volume)


def relative_l2_error(model, sol, box, n_points: int = 2**16, key: RngKey = RngKey(0), act: int = 0) -> dict:
    """``int |u - N|^2 / int u^2`` on shared nodes, with both parts."""
    err, se = l2_error(model, sol, box, n_points, key, act)
    p = quadrature_nodes(box, n_points, key)
    u = sol(p[:, 0], p[:, 1:])
    norm, norm_se = _vol_mean(u * u, box.volume)
    rel = err / norm
    return {
        "l2_error": err,
        "l2_stderr": se,
        "u_norm_sq": norm,
        "u_norm_sq_stderr": norm_se,
        "relative": rel,
        "relative_root": math.sqrt(rel),
        "n_points": n_points,
    }


# --- generalization gap -----------------------------------------------------


@dataclass
class GapReport:
    m1_values: list
    mean_sup_gap: list
    stderr: list
    fit: RateFit
    S: int
    reps: int
    M2: int
    reference_points: int
    seed: int

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["fit"] = self.fit.to_dict()
        return doc


def _losses(arch, thetas, pts, y, act):
    out = np.empty(len(thetas))
    for s, th in enumerate(thetas):
        r = forward(arch, th, pts, act)[0][:, 0] - y
        out[s] = float(np.mean(r * r))
    return out


def generalization_gap(
    arch,
    box: SpaceTimeBox,
    sol: ExactSolution,
    S: int,
    m1_values,
    M2: int,
    key: RngKey,
    *,
    R: float = 1.0,
    reps: int = 20,
    reference_factor: int = 64,
    act: int = 0,
    thetas=None,
) -> GapReport:
    """Rate at which ``sup_s |F_M1(theta_s) - risk(theta_s)|`` decays in ``M1``.

    ``risk(theta) = E[(N(T, X) - u(T, X))^2] + E[Var(Y | T, X)]`` is the
    population loss for targets averaged over ``M2`` samples. It is computed
    on ``reference_factor * max(M1)`` points with exact values of ``u`` and of
    the conditional variance, so no inner sampling noise enters it. Each M1
    is repeated ``reps`` times on disjoint streams.
    """
    A = Architecture.of(arch)
    m1_values = [int(m) for m in m1_values]
    if thetas is None:
        if S < 10:
            raise ValueError("need at least 10 parameter vectors")
        P = param_count(A)
        u = uniforms(key.seed, PURPOSE_SWEEP, np.arange(S * P, dtype=np.uint64), 1)[:, 0]
        thetas = list(R * (2 * u.reshape(S, P) - 1))
    S = len(thetas)
    if reps < 2:
        raise ValueError("need at least 2 repetitions for a standard error")

    nref = reference_factor * max(m1_values)
    ref_key = key.derive(0)
    p = quadrature_nodes(box, nref, ref_key)
    t, x = p[:, 0], p[:, 1:]
    u_ref = sol(t, x)
    noise = float(np.mean(sol.conditional_variance(t, x))) / M2
    risk = _losses(A, thetas, p, u_ref, act) + noise

    means, ses = [], []
    for j, M1 in enumerate(m1_values):
        sub = key.derive(j + 1)
        stride = (M1 + 1) * M2 + 1
        gaps = np.empty(reps)
        for r in range(reps):
            b = build_batch(sol, box, M1, M2, sub.offset(r * stride))
            emp = _losses(A, thetas, b.points, b.y, act)
            gaps[r] = float(np.max(np.abs(emp - risk)))
        means.append(float(np.mean(gaps)))
        ses.append(float(np.std(gaps, ddof=1) / math.sqrt(reps)))
    fit = rate_fit(list(zip(m1_values, means, ses)))
    return GapReport(m1_values, means, ses, fit, S, reps, M2, nref, key.seed)


# --- Sobolev-type sup estimate ----------------------------------------------


def sobolev_sup_estimate(phi, grad_phi, a: float, b: float, d: int, p: float, n_points: int = 2**14, key: RngKey = RngKey(0)):
    """Sampled ``sup |phi|`` on ``(a, b)^d`` and the bound

    ``16 sqrt(e) max((b-a)^(-d/p), b-a) [int (|phi|^p + |grad phi|^p)]^(1/p)``

    with the integral estimated on ``n_points`` uniform nodes. ``phi`` maps
    ``(n, d)`` to ``(n,)`` and ``grad_phi`` maps ``(n, d)`` to ``(n, d)``.
    Returns ``(lhs, rhs)``.
    """
    if not b > a:
        raise ValueError("need b > a")
    if p < max(2, d * d):
        raise ValueError(f"p must be >= max(2, d^2) = {max(2, d * d)}")
    u = uniforms(key.seed, PURPOSE_QUAD, key.stream + np.arange(n_points, dtype=np.uint64), d)
    x = a + (b - a) * u
    v = np.asarray(phi(x), dtype=np.float64).reshape(n_points)
    g = np.asarray(grad_phi(x), dtype=np.float64).reshape(n_points, d)
    gn = np.sqrt(np.einsum("ij,ij->i", g, g))
    integral = (b - a) ** d * float(np.mean(np.abs(v) ** p + gn**p))
    rhs = 16 * SQRT_E * max((b - a) ** (-d / p), b - a) * integral ** (1 / p)
    lhs = float(np.max(np.abs(v)))
    return lhs, rhs


def network_sobolev_check(arch, theta, act: int, a: float, b: float, p: float | None = None, **kw):
    """:func:`sobolev_sup_estimate` for a network with a C^1 activation."""
    if act < 1:
        raise ValueError("needs a C^1 activation (index >= 1)")
    A = Architecture.of(arch)
    d = A.input_dim
    p = max(2, d * d) if p is None else p
    net = Network(A, theta, act)
    return sobolev_sup_estimate(
        lambda x: net(x), lambda x: grad_input(A, theta, x, act).reshape(x.shape[0], d), a, b, d, p, **kw
    )


# --- width sweep ------------------------------------------------------------


@dataclass
class WidthSweep:
    widths: list
    seeds: list
    errors: list  # errors[i][j]: width i, seed j
    mean_error: list
    stderr: list
    spearman_mean: float
    spearman_per_seed: list
    fit: RateFit | None
    config: dict

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["fit"] = None if self.fit is None else self.fit.to_dict()
        return doc


def width_sweep(
    base: TrainConfig,
    sol: ExactSolution,
    box: SpaceTimeBox,
    widths,
    seeds,
    *,
    depth: int = 2,
    n_points: int = 2**16,
) -> WidthSweep:
    """Train ``depth`` hidden layers of each width for each seed; report L2 errors.

    Quadrature nodes are shared by all runs. The Spearman coefficient of
    width against the seed-averaged error summarizes the trend.
    """
    widths = [int(w) for w in widths]
    seeds = [int(s) for s in seeds]
    errs = np.empty((len(widths), len(seeds)))
    for i, w in enumerate(widths):
        for j, s in enumerate(seeds):
            cfg = base.replace(widths=[sol.d + 1] + [w] * depth + [1], seed=s)
            res = train(cfg, sol, box)
            errs[i, j] = l2_error((cfg.arch, res.theta), sol, box, n_points, RngKey(base.seed), cfg.act)[0]
    mean = errs.mean(axis=1)
    se = errs.std(axis=1, ddof=1) / math.sqrt(len(seeds)) if len(seeds) > 1 else np.zeros(len(widths))
    rho_mean = float(stats.spearmanr(widths, mean)[0])
    rho_seed = [float(stats.spearmanr(widths, errs[:, j])[0]) for j in range(len(seeds))]
    fit = rate_fit(list(zip(widths, mean, se))) if len(widths) >= 3 else None
    return WidthSweep(
        widths=widths,
        seeds=seeds,
        errors=errs.tolist(),
        mean_error=mean.tolist(),
        stderr=se.tolist(),
        spearman_mean=rho_mean,
        spearman_per_seed=rho_seed,
        fit=fit,
        config=base.to_dict() | {"depth": depth, "n_points": n_points},
    )


# --- decomposition report ---------------------------------------------------


@dataclass
class DecompositionReport:
    """Measured error next to the raw scalings of the three bound terms.

    The shared constant multiplying the terms is not identified and is never
    estimated, so only scalings and trends are reported.
    """

    l2_error: float
    l2_stderr: float
    relative_l2: float
    term1_sampling_scale: float
    term1_growth_base: float
    term2_width_scale: float
    term3_opt_proxy: float
    opt_best_loss: float
    opt_final_losses: list
    config: dict
    solution: dict
    box: dict
    m1_fit: dict | None = None
    width_fit: dict | None = None
    constant: str = "unknown (shared constant of the bound; not estimated)"
    optimizer: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def decomposition_report(
    result: TrainResult,
    sol: ExactSolution,
    box: SpaceTimeBox,
    proxy: OptProxy,
    *,
    n_points: int = 2**16,
    key: RngKey = RngKey(0),
    m1_fit: RateFit | None = None,
    width_fit: RateFit | None = None,
) -> DecompositionReport:
    """Assemble the report for a finished run.

    term1 is ``M1^(-1/2)`` (the growth base ``R + max hidden width`` is
    reported separately because its exponent involves the unknown constant),
    term2 is ``min hidden width^(-2/(d+5))`` and term3 the restart proxy.
    """
    cfg = result.config
    rel = relative_l2_error((cfg.arch, result.theta), sol, box, n_points, key, cfg.act)
    hidden = cfg.arch.hidden or (1,)
    return DecompositionReport(
        l2_error=rel["l2_error"],
        l2_stderr=rel["l2_stderr"],
        relative_l2=rel["relative"],
        term1_sampling_scale=cfg.M1**-0.5,
        term1_growth_base=cfg.R + max(hidden),
        term2_width_scale=min(hidden) ** (-2.0 / (sol.d + 5)),
        term3_opt_proxy=proxy.proxy,
        opt_best_loss=proxy.best_loss,
        opt_final_losses=list(proxy.final_losses),
        config=cfg.to_dict(),
        solution=sol.to_dict(),
        box=box.to_dict(),
        m1_fit=None if m1_fit is None else m1_fit.to_dict(),
        width_fit=None if width_fit is None else width_fit.to_dict(),
        optimizer={"kind": cfg.optimizer, "lr": cfg.lr, "beta1": cfg.beta1, "beta2": cfg.beta2, "eps": cfg.eps,
                   "proxy_restarts": len(proxy.seeds), "proxy_steps": proxy.steps},
    )


# --- sweep output -----------------------------------------------------------


def write_sweep_csv(path, abscissae, errors, stderrs) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["abscissa", "error", "stderr"])
        for a, e, s in zip(abscissae, errors, stderrs):
            w.writerow([repr(float(a)) if not float(a).is_integer() else int(a), repr(float(e)), repr(float(s))])


def plot_sweep_svg(path, fit: RateFit, xlabel: str, title: str = "") -> None:
    """Static log-log plot of a sweep with its fitted line (needs matplotlib)."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "deepkolmogorov"
    x = np.array(fit.abscissae)
    e = np.array(fit.errors)
    s = np.array(fit.stderrs)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(x, e, yerr=s, fmt="o", capsize=3)
    xx = np.geomspace(x.min(), x.max(), 50)
    ax.plot(xx, np.exp(fit.intercept) * xx**fit.slope, "-", label=f"slope {fit.slope:.3f} ± {fit.halfwidth:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
