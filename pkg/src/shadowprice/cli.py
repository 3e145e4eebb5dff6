"""Configuration-driven experiment runner.

Every subcommand reads a TOML file (missing keys fall back to
``DEFAULTS``), runs one experiment and writes its artifacts into a fresh
directory under ``--out`` named after a hash of the resolved inputs.

Exit status: 0 when every embedded check passes, 1 when a check fails,
2 for invalid configuration, 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from ._validation import check_lambda, check_scalar, check_seed
from .diagnostics import (HittingRule, TradingRule, arbitrage_demo, divergence_demo, f_lambda_curve,
                          rule_payoffs, stickiness_estimate)
from .dual import conjugacy_check
from .exceptions import (ConditioningError, FactorizationError, InfeasibleError, ParameterError,
                         ResourceError, ShapeError, SolverError)
from .fbm import GENERATORS, FbmSpec, covariance, sample_cholesky, sample_covariance_check, sample_mvn
from .market import CostSpec
from .primal import SolverConfig
from .shadow import girsanov_check, ito_coefficients, touching_stats, verify_shadow
from .tree import ScenarioTree, fbm_quantization_tree
from .utility import exponential_utility

KINDS = ("fbm-validate", "solve", "shadow-verify", "f-curve", "stickiness", "divergence", "arbitrage-demo")
STOCHASTIC = {"fbm-validate", "stickiness", "arbitrage-demo"}

DEFAULTS = {
    "model": {"kind": "fbm", "hurst": 0.75, "sigma": 0.05, "mu": 0.0, "horizon": 1.0, "depth": 6,
              "tree_file": ""},
    "cost": {"lambda": 0.01, "x": 0.0},
    "utility": {"name": "exponential"},
    "solver": {"tol": 1e-9, "max_iters": 200, "step0": 1.0},
    "tolerances": {"gap": 1e-6, "marginal": 1e-4, "spread": 1e-10, "trade": 1e-8, "slack": 1e-8,
                   "value": 1e-6, "position": 1e-5, "tower": 1e-10, "girsanov": 1e-8, "ito": 1e-6,
                   "n_sigma": 3.0},
    "sampling": {"generator": "pcg64", "n_paths": 100000, "n_steps": 16, "horizon": 1.0},
    "fbm_validate": {"hurst": [0.25, 0.75], "truncation": 1e8, "n_substeps": 20},
    "f_curve": {"lambdas": [0.005, 0.01, 0.05, 0.1, 0.3]},
    "stickiness": {"hurst": [0.25, 0.5, 0.75], "delta": 0.1, "rule": "barrier", "barrier": 0.5},
    "divergence": {"n_values": [2, 3, 4, 5, 6, 7, 8], "tail_prob": 0.5, "lambda": 0.25},
    "arbitrage": {"hurst": 0.75, "sigma": 1.0, "mu": 0.0, "lambda": 0.05, "rules": ["zero", "hold", "momentum"],
                  "size": 1.0, "threshold": 0.5, "level": 1.0},
}


class ConfigError(ParameterError):
    pass


def reference_config() -> str:
    """All defaults as TOML; ``seed`` has no default."""
    return "# defaults for every experiment; `seed` is required for sampling experiments\n" + \
        tomli_w.dumps(DEFAULTS)


# -- configuration ------------------------------------------------------------


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown configuration key")
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(name, "expected a table")
            out[key] = _merge(ref, val, name + ".")
        elif isinstance(ref, list):
            if not isinstance(val, list):
                raise ConfigError(name, "expected a list")
            out[key] = val
        elif isinstance(ref, bool) or isinstance(ref, str):
            if type(val) is not type(ref):
                raise ConfigError(name, f"expected {type(ref).__name__}")
            out[key] = val
        else:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(name, "expected a number")
            if isinstance(ref, int) and not isinstance(val, int):
                raise ConfigError(name, "expected an integer")
            out[key] = val
    return out


def load_config(path: str | None) -> tuple[dict, Path | None, int | None]:
    """Resolved configuration, its directory and the seed it names, if any."""
    if path is None:
        return copy.deepcopy(DEFAULTS), None, None
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}") from None
    seed = raw.pop("seed", None)
    return _merge(DEFAULTS, raw), p.parent, seed


def _validate(cfg: dict, kind: str):
    """Field-level checks beyond types; errors name the offending key."""
    check_lambda(cfg["cost"]["lambda"], "lambda")
    check_scalar(cfg["cost"]["x"], "cost.x")
    if cfg["utility"]["name"] != "exponential":
        raise ConfigError("utility.name", "only 'exponential' is available")
    m = cfg["model"]
    if m["kind"] not in ("fbm", "tree"):
        raise ConfigError("model.kind", "expected 'fbm' or 'tree'")
    if cfg["sampling"]["generator"] not in GENERATORS:
        raise ConfigError("sampling.generator", f"expected one of {sorted(GENERATORS)}")
    check_scalar(cfg["sampling"]["n_paths"], "sampling.n_paths", kind=int, low=1)
    check_scalar(cfg["sampling"]["n_steps"], "sampling.n_steps", kind=int, low=1)
    for key, val in cfg["tolerances"].items():
        check_scalar(val, f"tolerances.{key}", low=0.0, include_low=False)
    for lam in cfg["f_curve"]["lambdas"]:
        check_lambda(lam, "lambda")
    d = cfg["divergence"]
    lam = check_lambda(d["lambda"], "lambda")
    if kind == "divergence" and not 0.0 < lam < 0.5:
        raise ConfigError("lambda", f"the divergence family needs 0 < lambda < 1/2, got {lam}")
    check_lambda(cfg["arbitrage"]["lambda"], "lambda")
    for h in cfg["fbm_validate"]["hurst"] + cfg["stickiness"]["hurst"] + [cfg["arbitrage"]["hurst"], m["hurst"]]:
        check_scalar(h, "hurst", low=0.0, high=1.0, include_low=False, include_high=False)


def _solver_cfg(cfg: dict) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(float(s["tol"]), int(s["max_iters"]), float(s["step0"]))


def _resolve_tree_file(cfg: dict, base: Path | None) -> Path:
    name = cfg["model"]["tree_file"]
    if not name:
        raise ConfigError("model.tree_file", "required when model.kind = 'tree'")
    p = Path(name)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.is_file():
        raise ConfigError("model.tree_file", f"file not found: {name}")
    return p


def _build_tree(cfg: dict, tree_path: Path | None) -> ScenarioTree:
    m = cfg["model"]
    if m["kind"] == "tree":
        try:
            return ScenarioTree.from_json(tree_path.read_text())
        except (ParameterError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError("model.tree_file", f"not a node-record list: {exc!r}") from None
    spec = FbmSpec(float(m["hurst"]), float(m["horizon"]), int(m["depth"]), float(m["mu"]), float(m["sigma"]))
    return fbm_quantization_tree(spec, int(m["depth"]))


def _derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint64)[0])


# -- output helpers -----------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o).__name__}")

    return json.dumps(obj, indent=1, sort_keys=True, default=default) + "\n"


def blob_hash(data: bytes) -> str:
    """Git blob id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


class Result:
    def __init__(self):
        self.files: dict[str, str] = {}
        self.checks: dict[str, bool] = {}
        self.lines: list[str] = []
        self.tolerances: dict[str, float] = {}

    def check(self, name: str, ok: bool, detail: str = ""):
        self.checks[name] = bool(ok)
        self.lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))


# -- experiments --------------------------------------------------------------


def _solve(cfg, tree, res: Result):
    tol = cfg["tolerances"]
    cost = CostSpec(float(cfg["cost"]["lambda"]), float(cfg["cost"]["x"]))
    utility = exponential_utility()
    rep = conjugacy_check(tree, cost, utility, cost.x, _solver_cfg(cfg))
    res.files["tree.json"] = tree.to_json() + "\n"
    res.files["conjugacy.json"] = _json(rep.to_dict())
    rows = [(i, rep.primal.strategy.phi0[i], rep.primal.strategy.phi1[i], rep.primal.buys[i], rep.primal.sells[i])
            for i in range(tree.n_nodes)]
    res.files["primal.csv"] = _csv(["node_id", "phi0", "phi1", "buys", "sells"], rows)
    cps = rep.dual.cps
    res.files["dual.csv"] = _csv(["node_id", "z0", "z1"], [(i, cps.z0[i], cps.z1[i]) for i in range(tree.n_nodes)])
    res.lines += [f"nodes: {tree.n_nodes}  leaves: {len(tree.leaves)}  lambda: {cost.lam!r}  x: {cost.x!r}",
                  f"u(x)            = {rep.u!r}",
                  f"v(y_hat)+x*y_hat = {rep.v_plus_xy!r}",
                  f"y_hat = {rep.y_hat!r}  u'(x) = {rep.u_prime!r}"]
    res.tolerances.update(gap=tol["gap"], marginal=tol["marginal"])
    res.check("duality_gap", rep.relative_gap <= tol["gap"], f"gap {rep.gap:.3e} (relative {rep.relative_gap:.3e})")
    rel = abs(rep.y_hat - rep.u_prime) / rep.u_prime
    res.check("dual_minimizer_matches_marginal_utility", rel <= tol["marginal"], f"{rel:.3e}")
    return rep, cost, utility


def run_solve(cfg, tree, seed, jobs):
    res = Result()
    _solve(cfg, tree, res)
    return res


def run_shadow_verify(cfg, tree, seed, jobs):
    res = Result()
    rep, cost, utility = _solve(cfg, tree, res)
    tol = cfg["tolerances"]
    ver = verify_shadow(tree, cost, utility, rep.primal, rep.dual, tol_spread=tol["spread"],
                        tol_trade=tol["trade"], tol_slack=tol["slack"], tol_value=tol["value"],
                        tol_position=tol["position"], strict=False, solver_cfg=_solver_cfg(cfg))
    res.tolerances.update({k: tol[k] for k in ("spread", "trade", "slack", "value", "position", "tower",
                                               "girsanov", "ito")})
    for c in ver.checks:
        res.check(c.name, c.passing, f"{c.max_violation:.3e}")
    sh = ver.shadow
    towers = rep.dual.cps.tower_residual(tree)
    res.check("towers", towers <= tol["tower"], f"{towers:.3e}")
    g = girsanov_check(rep.dual, sh, tree)
    res.check("shadow_martingale", g <= tol["girsanov"], f"{g:.3e}")
    touch = touching_stats(sh, tree, cost)
    res.check("log_spread_containment", touch.containment_ok,
              f"[{touch.min_log_spread:.3e}, {touch.max_log_spread:.3e}] within [0, {touch.spread_width:.3e}]")
    extra = {"verification": json.loads(ver.to_json()), "touching": touch.to_dict(), "towers": towers,
             "shadow_martingale": g}
    try:
        ito = ito_coefficients(sh, rep.dual, tree)
    except ShapeError as exc:
        res.lines.append(f"market price of risk identity skipped: {exc}")
    else:
        res.check("market_price_of_risk", ito.max_error <= tol["ito"], f"{ito.max_error:.3e}")
        extra["ito_max_error"] = ito.max_error
    res.files["shadow.csv"] = _csv(["node_id", "t", "S", "s_hat", "binding"],
                                   [(i, tree.t[i], tree.S[i], sh.s_hat[i], sh.binding[i]) for i in range(tree.n_nodes)])
    res.files["verification.json"] = _json(extra)
    return res


def run_f_curve(cfg, tree, seed, jobs):
    res = Result()
    x = float(cfg["cost"]["x"])
    curve = f_lambda_curve(tree, cfg["f_curve"]["lambdas"], x, exponential_utility(), _solver_cfg(cfg))
    res.files["f_curve.csv"] = _csv(["lambda", "f"], curve.rows())
    res.lines.append(f"nodes: {tree.n_nodes}  x: {x!r}")
    res.lines += [f"f({lam!r}) = {f!r}" for lam, f in curve.rows()]
    for name, ok in curve.checks.items():
        res.check(name, ok)
    return res


def _sampling_spec(cfg, hurst, sigma=1.0, mu=0.0):
    s = cfg["sampling"]
    return FbmSpec(float(hurst), float(s["horizon"]), int(s["n_steps"]), float(mu), float(sigma))


def run_fbm_validate(cfg, tree, seed, jobs):
    res = Result()
    s, v = cfg["sampling"], cfg["fbm_validate"]
    n_sigma = float(cfg["tolerances"]["n_sigma"])
    res.tolerances["n_sigma"] = n_sigma
    rows = []
    for k, h in enumerate(v["hurst"]):
        spec = _sampling_spec(cfg, h)
        grid = covariance(spec)
        chol = sample_cholesky(grid, int(s["n_paths"]), _derive_seed(seed, k, 0), spec=spec,
                               generator=s["generator"], jobs=jobs)
        mvn = sample_mvn(spec, float(v["truncation"]) * spec.horizon, int(v["n_substeps"]), int(s["n_paths"]),
                         _derive_seed(seed, k, 1), generator=s["generator"], jobs=jobs)
        rc = sample_covariance_check(chol, grid.cov, n_sigma)
        rm = sample_covariance_check(mvn, grid.cov, n_sigma)
        zx = (rc["estimate"] - rm["estimate"]) / np.sqrt(rc["stderr"] ** 2 + rm["stderr"] ** 2)
        n = grid.n_steps
        for i in range(n):
            for j in range(i, n):
                rows.append((h, grid.times[i], grid.times[j], grid.cov[i, j], rc["estimate"][i, j],
                             rm["estimate"][i, j], rc["z"][i, j], rm["z"][i, j], zx[i, j]))
        res.check(f"cholesky_vs_exact_H={h}", rc["passing"], f"max |z| {rc['max_abs_z']:.2f}")
        res.check(f"mvn_vs_exact_H={h}", rm["passing"], f"max |z| {rm['max_abs_z']:.2f}")
        mz = float(np.max(np.abs(zx)))
        res.check(f"cholesky_vs_mvn_H={h}", mz <= n_sigma, f"max |z| {mz:.2f}")
    bm = covariance(_sampling_spec(cfg, 0.5))
    t = bm.times
    exact = np.minimum.outer(t, t)
    res.check("brownian_covariance_exact", bool(np.array_equal(bm.cov, exact)),
              f"max |diff| {np.max(np.abs(bm.cov - exact)):.1e}")
    res.files["fbm_validate.csv"] = _csv(["hurst", "t_i", "t_j", "exact", "cholesky", "mvn", "z_cholesky", "z_mvn",
                                          "z_cross"], rows)
    res.lines.append(f"paths per sampler: {s['n_paths']}  steps: {s['n_steps']}  generator: {s['generator']}")
    return res


def run_stickiness(cfg, tree, seed, jobs):
    res = Result()
    s, st = cfg["sampling"], cfg["stickiness"]
    n_sigma = float(cfg["tolerances"]["n_sigma"])
    res.tolerances["n_sigma"] = n_sigma
    rule = HittingRule(st["rule"], float(st["barrier"]))
    rows = []
    for k, h in enumerate(st["hurst"]):
        spec = _sampling_spec(cfg, h)
        paths = sample_cholesky(covariance(spec), int(s["n_paths"]), _derive_seed(seed, k), spec=spec,
                                generator=s["generator"], jobs=jobs)
        rep = stickiness_estimate(paths, float(st["delta"]), rule, n_sigma)
        rows.append((h, rep.delta, rep.tau_rule, rep.empirical_prob, rep.standard_error, rep.n_paths, rep.positive))
        res.check(f"positive_H={h}", rep.positive, f"p = {rep.empirical_prob:.5f} +/- {rep.standard_error:.5f}")
    res.files["stickiness.csv"] = _csv(["hurst", "delta", "tau_rule", "empirical_prob", "standard_error",
                                        "n_paths", "positive"], rows)
    return res


def run_divergence(cfg, tree, seed, jobs):
    res = Result()
    d = cfg["divergence"]
    rep = divergence_demo(d["n_values"], float(d["tail_prob"]), float(d["lambda"]), float(cfg["cost"]["x"]),
                          exponential_utility(), _solver_cfg(cfg))
    rows = [(r.n, r.value, r.expected_tv, r.head_mass, r.dual_value, r.root_position) for r in rep.rows]
    res.files["divergence.csv"] = _csv(["n", "value", "expected_tv", "head_mass", "dual_value", "head_position"], rows)
    res.lines += [f"n={r.n}: u={r.value!r} E[tv]={r.expected_tv!r} head mass={r.head_mass!r}" for r in rep.rows]
    for name, ok in rep.checks.items():
        res.check(name, ok)
    return res


def run_arbitrage(cfg, tree, seed, jobs):
    res = Result()
    s, a = cfg["sampling"], cfg["arbitrage"]
    n_sigma = float(cfg["tolerances"]["n_sigma"])
    res.tolerances["n_sigma"] = n_sigma
    spec = _sampling_spec(cfg, a["hurst"], a["sigma"], a["mu"])
    paths = sample_cholesky(covariance(spec), int(s["n_paths"]), _derive_seed(seed, 0), spec=spec,
                            generator=s["generator"], jobs=jobs)
    rows, summary = [], {}
    for kind in a["rules"]:
        rule = TradingRule(kind, float(a["size"]), float(a["threshold"]))
        rep = arbitrage_demo(paths, float(a["lambda"]), rule, float(a["level"]), n_sigma)
        summary[kind] = rep.to_dict()
        for channel, ps in (("frictionless", rep.frictionless), ("costs", rep.with_costs)):
            rows.append((kind, channel, ps.mean, ps.standard_error, ps.minimum, ps.prob_above, ps.level))
        for name, ok in rep.checks.items():
            res.check(f"{kind}:{name}", ok)
        fr, co, _ = rule_payoffs(paths, rule, float(a["lambda"]))
        if kind == "zero":
            res.check("zero:payoff_identically_zero", bool(np.all(fr == 0) and np.all(co == 0)))
        if kind == "hold":
            S = paths.prices()
            ok = np.allclose(fr, rule.size * (S[:, -1] - S[:, 0]), rtol=1e-12, atol=1e-12)
            res.check("hold:frictionless_payoff_is_price_change", bool(ok))
    res.files["arbitrage.csv"] = _csv(["rule", "channel", "mean", "standard_error", "min", "prob_above", "level"],
                                      rows)
    res.files["arbitrage.json"] = _json(summary)
    return res


RUNNERS = {"solve": run_solve, "shadow-verify": run_shadow_verify, "f-curve": run_f_curve,
           "fbm-validate": run_fbm_validate, "stickiness": run_stickiness, "divergence": run_divergence,
           "arbitrage-demo": run_arbitrage}


# -- driver -------------------------------------------------------------------


def _run_dir(out: Path, kind: str, digest: str) -> Path:
    base = out / f"{kind}-{digest[:12]}"
    path, k = base, 1
    while path.exists():
        k += 1
        path = Path(f"{base}-{k}")
    return path


def run(kind: str, config: str | None = None, seed: int | None = None, out: str = "runs", jobs: int = 1,
        stream=None) -> tuple[int, Path | None]:
    """Run one experiment; returns ``(exit status, run directory)``."""
    stream = stream or sys.stdout
    err = sys.stderr
    try:
        if kind not in RUNNERS:
            raise ConfigError("experiment", f"unknown experiment {kind!r}")
        cfg, base, cfg_seed = load_config(config)
        if seed is None:
            seed = cfg_seed
        if kind in STOCHASTIC:
            if seed is None:
                raise ConfigError("seed", "required for sampling experiments (use --seed or a top-level seed key)")
        if seed is not None:
            seed = check_seed(seed)
        check_scalar(jobs, "jobs", kind=int, low=1)
        _validate(cfg, kind)
        inputs = {}
        tree_path = None
        tree = None
        if kind in ("solve", "shadow-verify", "f-curve"):
            if cfg["model"]["kind"] == "tree":
                tree_path = _resolve_tree_file(cfg, base)
                inputs[cfg["model"]["tree_file"]] = blob_hash(tree_path.read_bytes())
            tree = _build_tree(cfg, tree_path)
        digest = hashlib.sha1(_json({"kind": kind, "config": cfg, "seed": seed, "inputs": inputs,
                                     "version": __version__}).encode()).hexdigest()
        result = RUNNERS[kind](cfg, tree, seed, jobs)
    except (ParameterError, ResourceError, ShapeError) as exc:
        field = getattr(exc, "field", None)
        print(f"error: invalid configuration: {exc}" if field is None else f"error: {exc}", file=err)
        return 2, None
    except (SolverError, InfeasibleError, FactorizationError, ConditioningError) as exc:
        print(f"error: solver failure ({type(exc).__name__}): {exc}", file=err)
        return 3, None

    run_dir = _run_dir(Path(out), kind, digest)
    run_dir.mkdir(parents=True)
    failing = [name for name, ok in result.checks.items() if not ok]
    summary = [f"experiment: {kind}", f"seed: {seed if seed is not None else 'none'}",
               f"input hash: {digest}", ""] + result.lines + [""]
    summary.append("tolerances: " + ", ".join(f"{k}={v!r}" for k, v in sorted(result.tolerances.items())))
    summary.append(f"status: {'PASS' if not failing else 'FAIL'} ({len(result.checks) - len(failing)}"
                   f"/{len(result.checks)} checks)")
    result.files["summary.txt"] = "\n".join(summary) + "\n"
    outputs = {}
    for name, text in sorted(result.files.items()):
        data = text.encode()
        (run_dir / name).write_bytes(data)
        outputs[name] = blob_hash(data)
    manifest = {"experiment": kind, "seed": seed, "input_hash": digest, "version": __version__,
                "config": cfg, "inputs": inputs, "outputs": outputs,
                "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    (run_dir / "manifest.json").write_text(_json(manifest))
    stream.write(result.files["summary.txt"])
    stream.write(f"artifacts: {run_dir}\n")
    if failing:
        print("failing checks: " + ", ".join(failing), file=err)
        return 1, run_dir
    return 0, run_dir


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    common.add_argument("--out", default="runs", help="parent directory for run directories")
    common.add_argument("--jobs", type=int, default=1, help="worker cap for path sampling")
    parser = argparse.ArgumentParser(prog="shadowprice", description=__doc__.splitlines()[0])
    parser.add_argument("--print-defaults", action="store_true", help="print the reference configuration")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment")
    for kind in KINDS:
        sub.add_parser(kind, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(reference_config())
        return 0
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        return 2
    status, _ = run(args.experiment, args.config, args.seed, args.out, args.jobs)
    return status


if __name__ == "__main__":
    sys.exit(main())
