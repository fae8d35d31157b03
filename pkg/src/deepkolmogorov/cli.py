"""Command-line experiment runner.

Usage::

    deepkolmogorov {train,rates,bounds,fk-check,mc-rate,embed-check} --config FILE [--out DIR] [--seed N]

The config is TOML. A top-level ``seed`` (overridable with ``--seed``) is the
only source of randomness. Unknown keys are rejected. Exit codes: 0 success,
2 configuration error, 3 numeric failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .analysis import (
    decomposition_report,
    generalization_gap,
    plot_sweep_svg,
    width_sweep,
    write_sweep_csv,
)
from .apriori_bounds import check_bounds
from .constructions import ShallowNet, embed_shallow_to_deep, identity_net, max_discrepancy
from .dkm import SpaceTimeBox
from .heat_oracle import ExactSolution, exact_eval, fk_estimate, mc_rate_check
from .net_core import Architecture, Network
from .rng import RngKey
from .trainer import NumericFailure, TrainConfig, opt_error_proxy, train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# --- config handling --------------------------------------------------------

_SECTIONS = {
    "train": {"solution", "box", "train", "report"},
    "rates": {"solution", "box", "train", "sweep", "output"},
    "bounds": {"bounds"},
    "fk-check": {"solution", "fk"},
    "mc-rate": {"mc_rate"},
    "embed-check": {"embed"},
}

_DEFAULTS = {
    "report": {"n_points": 65536, "proxy_budget": 4, "timing_csv": False},
    "sweep": {"m1_values": [256, 1024, 4096, 16384], "S": 50, "M2": 8, "reps": 20, "theta_R": 1.0,
              "gap_widths": [2, 16, 16, 1], "widths": [], "seeds": [0], "depth": 2, "n_points": 65536},
    "output": {"svg": False},
    "bounds": {"trials": 1000, "points": 10000, "a": -1.0, "b": 1.0, "max_width": 16, "theta_range": 2.0,
               "smooth_index": 1},
    "fk": {"M": 100000, "t": 0.0, "x": None, "z_max": 5.0},
    "mc_rate": {"p": 2.0, "ns": [100, 1000, 10000, 100000], "trials": 200, "functional": "square"},
    "embed": {"shallow": "identity", "deep": [1, 2, 2, 1], "cases": 1, "points": 1000, "scale": 1.0,
              "input_scale": 10.0},
}


def _section(cfg: dict, name: str) -> dict:
    given = cfg.get(name, {})
    if not isinstance(given, dict):
        raise ConfigError(f"[{name}] must be a table")
    if name not in _DEFAULTS:
        return dict(given)
    unknown = set(given) - set(_DEFAULTS[name])
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return {**_DEFAULTS[name], **given}


def load_config(path: str, command: str, seed_override: int | None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    allowed = _SECTIONS[command] | {"seed"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for '{command}': {sorted(unknown)}")
    if seed_override is not None:
        cfg["seed"] = seed_override
    if "seed" not in cfg:
        raise ConfigError("missing required field 'seed'")
    seed = cfg["seed"]
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("'seed' must be an unsigned 64-bit integer")
    return cfg, text


def _require(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"missing required section [{name}]")
    return cfg[name]


def _solution(cfg) -> ExactSolution:
    try:
        return ExactSolution.from_dict(_require(cfg, "solution"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[solution]: {exc}") from exc


def _box(cfg) -> SpaceTimeBox:
    try:
        return SpaceTimeBox.from_dict(_require(cfg, "box"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[box]: {exc}") from exc


def _train_cfg(cfg) -> TrainConfig:
    doc = dict(_require(cfg, "train"))
    if "seed" in doc:
        raise ConfigError("[train] may not set 'seed'; use the top-level seed")
    doc["seed"] = cfg["seed"]
    try:
        return TrainConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[train]: {exc}") from exc


def _meta(cfg: dict, text: str, command: str) -> dict:
    return {"tool": "deepkolmogorov", "version": __version__, "command": command, "seed": cfg["seed"],
            "config": cfg, "config_text": text}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")


# --- commands ---------------------------------------------------------------


def cmd_train(cfg: dict, text: str, out: Path) -> int:
    sol, box, tc = _solution(cfg), _box(cfg), _train_cfg(cfg)
    rep = _section(cfg, "report")
    if tc.restarts < 2:
        raise ConfigError("[train] restarts must be >= 2 for the optimization-error proxy")
    if tc.arch.input_dim != sol.d + 1:
        raise ConfigError(f"[train] widths must start with d + 1 = {sol.d + 1}")
    if box.d != sol.d:
        raise ConfigError(f"[box] has {box.d} space ranges, solution has d = {sol.d}")
    if box.t_range[0] < 0 or box.t_range[1] > sol.T:
        raise ConfigError(f"[box] time range must lie in [0, {sol.T}]")
    res = train(tc, sol, box)
    proxy = opt_error_proxy(tc, sol, box, tc.restarts, budget_factor=int(rep["proxy_budget"]))
    report = decomposition_report(res, sol, box, proxy, n_points=int(rep["n_points"]), key=RngKey(cfg["seed"]))
    values = [report.l2_error, report.term3_opt_proxy, *proxy.final_losses]
    if not all(math.isfinite(v) for v in values):
        raise NumericFailure("non-finite value in the report")
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg, text, "train")
    ckpt = Network(tc.arch, res.theta, tc.act).to_dict()
    ckpt["meta"] = meta
    _write_json(out / "checkpoint.json", ckpt)
    res.write_history(out / "history.csv")
    if rep["timing_csv"]:
        res.write_timing(out / "timing.csv")
    doc = report.to_dict()
    doc["smoothed_train_loss"] = res.smoothed_loss()
    doc["meta"] = meta
    _write_json(out / "report.json", doc)
    print(f"relative L2 error {report.relative_l2:.4e}; artifacts in {out}")
    return EXIT_OK


def cmd_rates(cfg: dict, text: str, out: Path) -> int:
    sol, box = _solution(cfg), _box(cfg)
    sw = _section(cfg, "sweep")
    opts = _section(cfg, "output")
    m1 = [int(v) for v in sw["m1_values"]]
    if len(m1) < 3:
        raise ConfigError(f"[sweep] m1_values needs at least 3 entries for a rate fit, got {len(m1)}")
    widths = [int(v) for v in sw["widths"]]
    if widths and len(widths) < 3:
        raise ConfigError(f"[sweep] widths needs at least 3 entries for a rate fit, got {len(widths)}")
    gap_arch = Architecture(tuple(sw["gap_widths"]))
    if gap_arch.input_dim != sol.d + 1:
        raise ConfigError(f"[sweep] gap_widths must start with d + 1 = {sol.d + 1}")
    key = RngKey(cfg["seed"])
    gap = generalization_gap(gap_arch, box, sol, int(sw["S"]), m1, int(sw["M2"]), key,
                             R=float(sw["theta_R"]), reps=int(sw["reps"]))
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "m1_sweep.csv", m1, gap.mean_sup_gap, gap.stderr)
    doc = {"m1_sweep": gap.to_dict(), "width_sweep": None}
    if widths:
        ws = width_sweep(_train_cfg(cfg), sol, box, widths, sw["seeds"], depth=int(sw["depth"]),
                         n_points=int(sw["n_points"]))
        write_sweep_csv(out / "width_sweep.csv", widths, ws.mean_error, ws.stderr)
        doc["width_sweep"] = ws.to_dict()
    if opts["svg"]:
        plot_sweep_svg(out / "m1_sweep.svg", gap.fit, "M1", "generalization gap")
        if widths and doc["width_sweep"]["fit"] is not None:
            plot_sweep_svg(out / "width_sweep.svg", ws.fit, "hidden width", "L2 error")
    doc["meta"] = _meta(cfg, text, "rates")
    _write_json(out / "rates.json", doc)
    print(f"M1 slope {gap.fit.slope:.3f} ± {gap.fit.halfwidth:.3f}")
    if widths and ws.fit is not None:
        print(f"width slope {ws.fit.slope:.3f} ± {ws.fit.halfwidth:.3f}; Spearman {ws.spearman_mean:.3f}")
    return EXIT_OK


def cmd_bounds(cfg: dict, text: str, out: Path) -> int:
    b = _section(cfg, "bounds")
    try:
        rep = check_bounds(int(b["trials"]), cfg["seed"], points=int(b["points"]), a=float(b["a"]), b=float(b["b"]),
                           max_width=int(b["max_width"]), theta_range=float(b["theta_range"]),
                           smooth_index=int(b["smooth_index"]))
    except ValueError as exc:
        raise ConfigError(f"[bounds]: {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    doc = rep.to_dict()
    doc["meta"] = _meta(cfg, text, "bounds")
    _write_json(out / "bounds.json", doc)
    print(f"{rep.total_violations} violations in {rep.trials} cases")
    return EXIT_OK if rep.total_violations == 0 else EXIT_VERIFY


def cmd_fk_check(cfg: dict, text: str, out: Path) -> int:
    sol = _solution(cfg)
    fk = _section(cfg, "fk")
    xs = fk["x"] if fk["x"] is not None else [[0.0] * sol.d]
    xs = np.asarray(xs, dtype=np.float64).reshape(-1, sol.d)
    t = float(fk["t"])
    M = int(fk["M"])
    if not 0 <= t <= sol.T:
        raise ConfigError(f"[fk] t must lie in [0, {sol.T}]")
    if M < 1:
        raise ConfigError("[fk] M must be >= 1")
    rows, ok = [], True
    for i, x in enumerate(xs):
        mean, se = fk_estimate(sol, t, x, M, RngKey(cfg["seed"], i * (M + 1)))
        exact = float(exact_eval(sol, t, x))
        err = mean - exact
        if se > 0:
            z = err / se
            passed = abs(z) <= float(fk["z_max"])
        else:
            z = 0.0 if err == 0 else math.inf
            passed = err == 0
        ok &= passed
        rows.append({"x": x.tolist(), "estimate": mean, "stderr": se, "exact": exact, "error": err, "z": z,
                     "passed": passed})
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fk_check.json", {"t": t, "M": M, "points": rows, "meta": _meta(cfg, text, "fk-check")})
    print(f"{sum(r['passed'] for r in rows)}/{len(rows)} points within {fk['z_max']} standard errors")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_mc_rate(cfg: dict, text: str, out: Path) -> int:
    mc = _section(cfg, "mc_rate")
    try:
        rep = mc_rate_check(float(mc["p"]), mc["ns"], int(mc["trials"]), RngKey(cfg["seed"]), mc["functional"])
    except ValueError as exc:
        raise ConfigError(f"[mc_rate]: {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "mc_rate.csv", rep.ns, rep.errors, rep.stderrs)
    doc = rep.to_dict()
    doc["meta"] = _meta(cfg, text, "mc-rate")
    _write_json(out / "mc_rate.json", doc)
    # a ratio above one is only a failure when it exceeds the noise of the estimate
    noisy_ok = all(r - 3 * s / b <= 1.0 for r, s, b in zip(rep.ratios, rep.stderrs, rep.bounds))
    print(f"slope {rep.fit.slope:.3f} ± {rep.fit.halfwidth:.3f}; max ratio {max(rep.ratios):.3f}")
    return EXIT_OK if noisy_ok else EXIT_VERIFY


def cmd_embed_check(cfg: dict, text: str, out: Path) -> int:
    e = _section(cfg, "embed")
    deep = Architecture(tuple(e["deep"]))
    rng = np.random.default_rng([cfg["seed"], 0])
    cases = []
    worst = 0.0
    for c in range(int(e["cases"])):
        if e["shallow"] == "identity":
            arch, theta = identity_net()
            shallow = ShallowNet(arch, theta)
        else:
            d, m, _ = e["shallow"]
            shallow = ShallowNet.random(int(d), int(m), rng, float(e["scale"]))
        try:
            theta = embed_shallow_to_deep(shallow, deep)
        except ValueError as exc:
            raise ConfigError(f"[embed]: {exc}") from exc
        x = rng.uniform(-e["input_scale"], e["input_scale"], size=(int(e["points"]), deep.input_dim))
        disc = max_discrepancy(shallow.arch, shallow.params, deep, theta, x)
        worst = max(worst, disc)
        cases.append({"shallow": shallow.arch.widths, "max_discrepancy": disc,
                      "max_entry": float(np.max(np.abs(theta))),
                      "shallow_max_entry": float(np.max(np.abs(shallow.params)))})
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "embed_check.json", {"deep": list(deep.widths), "cases": cases, "worst": worst,
                                           "tolerance": 1e-12, "meta": _meta(cfg, text, "embed-check")})
    print(f"worst discrepancy {worst:.3e}")
    return EXIT_OK if worst <= 1e-12 else EXIT_VERIFY


COMMANDS = {
    "train": cmd_train,
    "rates": cmd_rates,
    "bounds": cmd_bounds,
    "fk-check": cmd_fk_check,
    "mc-rate": cmd_mc_rate,
    "embed-check": cmd_embed_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deepkolmogorov", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="TOML experiment config")
    ap.add_argument("--out", default="out", help="output directory (default ./out)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, text = load_config(args.config, args.command, args.seed)
        return COMMANDS[args.command](cfg, text, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # library preconditions violated by configured values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
