"""Command line runner: ``lusinlab run`` and ``lusinlab describe``.

Configuration is TOML (JSON also accepted, chosen by file extension).  Every
key is optional; missing keys take the defaults in :data:`DEFAULTS`.
Outputs written to ``--out``:

* ``result.json``: configuration, checks with tolerances, aggregate verdict;
* ``checks.csv``: one row per check or sweep point;
* ``<series>.dat``: two-column plot data with ``#`` header lines;
* ``timing.json``: wall times (kept apart so the other files are
  byte-reproducible).

Exit status: 0 when every check passes, 1 on any failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import difflib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .suites import FAIL, RUNNERS, SUITES

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("lusinlab")

JOBS_ENV = "LUSINLAB_JOBS"

DEFAULTS: dict = {
    "run": {"seed": 0},
    "space": {"lam": [1.0, 1.0]},
    "kernel": {"times": [1e-2, 1e-1, 1.0, 10.0, 100.0], "tol": 1e-6},
    "semigroup": {
        "n_functions": 50, "max_dim": 3, "max_degree": 6,
        "t_min": 1e-2, "t_max": 10.0, "n_times": 8,
        "agreement_tol": 1e-6, "contraction_tol": 1e-8,
        "n_convexity": 1000, "n_harnack": 1000,
    },
    "fractional": {
        "b_values": [0.0, 0.1, 1.0, 10.0], "t_values": [0.0, 0.1, 1.0, 10.0],
        "scalar_tol": 1e-8, "n_representation": 100, "representation_tol": 1e-6,
        "n_jt_functions": 10, "n_jt_points": 50, "n_jt_times": 10, "jt_tol": 1e-6,
        "n_riesz": 50, "riesz_tol": 1e-10,
    },
    "lusin": {
        "variants": ["daprato", "wiener", "rcd"], "families": ["h1", "h2", "h3", "exp"],
        "dims": [1], "n_points": 1000, "n_pairs": 100_000, "n_seeds": 5,
        "exhaustive_tol": 0.05, "seed_tol": 0.10,
    },
    "flow": {
        "horizon": 1.0, "omega": 1.0, "dt": 1e-2, "cloud_size": 10_000, "p": 2.0,
        "epsilons": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        "cm_lam": [1.0, 0.25], "cm_epsilons": [1e-1, 1e-2, 1e-3],
        "shear_a": 0.3, "r": 2.0, "lr_epsilons": [1e-1, 1e-2, 1e-3],
        "integrator_tol": 1e-7, "min_order": 3.8,
    },
}

DESCRIPTIONS = {
    "kernel": (
        "Total variation of the subordination kernel K(s,t): the integral of |K(s,t)| "
        "over s > 0 equals (4/sqrt(pi)) sqrt(t).",
        ["kernel.times", "kernel.tol"],
    ),
    "semigroup": (
        "Ornstein-Uhlenbeck semigroups P_t (covariance-scaled) and T_t (unit speed): "
        "spectral Hermite evaluation against the Mehler formula; gradient contraction "
        "|∇P_t f| <= e^{-t/(2 lam_max)} P_t|∇f| and the Cameron-Martin commutation "
        "|D_H T_t f|_H <= e^{-t} T_t|D_H f|_H; log-convexity of R_t g along segments "
        "(exponent s(1-s)|h|^2/t, sharp constant reported); Wang's Harnack inequality "
        "for the curvature-1 OU instance.",
        ["semigroup.n_functions", "semigroup.max_dim", "semigroup.max_degree",
         "semigroup.t_min", "semigroup.t_max", "semigroup.n_times",
         "semigroup.agreement_tol", "semigroup.contraction_tol",
         "semigroup.n_convexity", "semigroup.n_harnack"],
    ),
    "fractional": (
        "Square roots of generators: scalar subordination identities for e^{-bt}; the "
        "representation R_t f - f = ∫ K(s,t) R_s sqrt(-L) f ds; the maximal bound "
        "|R_t f - f| <= (4/sqrt(pi)) sqrt(t) sup_s |R_s sqrt(I-L) f| for killed "
        "semigroups; the p = 2 identity between spectral and Dirichlet energies.",
        ["fractional.b_values", "fractional.t_values", "fractional.scalar_tol",
         "fractional.n_representation", "fractional.representation_tol",
         "fractional.n_jt_functions", "fractional.n_jt_points", "fractional.n_jt_times",
         "fractional.jt_tol", "fractional.n_riesz", "fractional.riesz_tol"],
    ),
    "lusin": (
        "Lusin-Lipschitz estimate |f(x) - f(y)| <= C dist(x,y)(g(x) + g(y)) with maximal "
        "weights in three variants: daprato (Euclidean distance, P_t weights), wiener "
        "(Cameron-Martin distance, T_t weights), rcd (heat flow on the curvature-1 "
        "Gaussian space, alpha-power gradient term). Sampled maxima are compared with "
        "exhaustive pair search and across seeds.",
        ["lusin.variants", "lusin.families", "lusin.dims", "lusin.n_points",
         "lusin.n_pairs", "lusin.n_seeds", "lusin.exhaustive_tol", "lusin.seed_tol"],
    ),
    "flow": (
        "Regular Lagrangian flows: RK4 accuracy and order on rotations; logarithmic "
        "stability ∫|X_t - Xbar_t| ∧ 1 dm <= C/|log delta| with Phi(t) <= C1 and the "
        "Chebyshev split, on a rotation perturbation sweep, in Cameron-Martin norms on "
        "an anisotropic space, and for L^r-regular shear flows. Runs with delta >= 1 "
        "are reported as hypothesis-violated.",
        ["flow.horizon", "flow.omega", "flow.dt", "flow.cloud_size", "flow.p",
         "flow.epsilons", "flow.cm_lam", "flow.cm_epsilons", "flow.shear_a", "flow.r",
         "flow.lr_epsilons", "flow.integrator_tol", "flow.min_order"],
    ),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the file position or key."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _parse_file(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1:1: top level must be an object")
        return data
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty array, got {value!r}")
        proto = default[0]
        return [_coerce(f"{key}[{i}]", v, proto) for i, v in enumerate(value)]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported value {value!r}")


def merge_config(user: dict) -> dict:
    """Overlay a parsed configuration on the defaults, validating every key."""
    cfg = copy.deepcopy(DEFAULTS)
    for section, body in user.items():
        if section not in cfg:
            hint = difflib.get_close_matches(section, list(cfg), n=1)
            raise ConfigError(f"unknown section [{section}]" + (f"; did you mean [{hint[0]}]?" if hint else ""))
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in cfg[section]:
                hint = difflib.get_close_matches(key, list(cfg[section]), n=1)
                raise ConfigError(f"unknown key {section}.{key}" + (f"; did you mean {hint[0]}?" if hint else ""))
            cfg[section][key] = _coerce(f"{section}.{key}", value, DEFAULTS[section][key])
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if any(l <= 0 for l in cfg["space"]["lam"]):
        raise ConfigError("space.lam: eigenvalues must be positive")
    if any(l <= 0 for l in cfg["flow"]["cm_lam"]) or len(cfg["flow"]["cm_lam"]) != 2:
        raise ConfigError("flow.cm_lam: need two positive eigenvalues")
    if cfg["run"]["seed"] < 0 or cfg["run"]["seed"] >= 2**64:
        raise ConfigError("run.seed: must be an unsigned 64-bit integer")
    for v in cfg["lusin"]["variants"]:
        if v not in ("daprato", "wiener", "rcd"):
            raise ConfigError(f"lusin.variants: unknown variant {v!r}")
    if any(d not in (1, 2) for d in cfg["lusin"]["dims"]):
        raise ConfigError("lusin.dims: exhaustive comparison supports d = 1 or 2")
    fc = cfg["flow"]
    if fc["dt"] <= 0 or abs(round(fc["horizon"] / fc["dt"]) * fc["dt"] - fc["horizon"]) > 1e-9:
        raise ConfigError("flow.dt: must be positive and divide flow.horizon")
    if fc["p"] < fc["r"] / (fc["r"] - 1.0):
        raise ConfigError("flow.p: must be at least r/(r-1)")


def load_config(path: str | os.PathLike) -> dict:
    return merge_config(_parse_file(Path(path)))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_outputs(out: Path, suite: str, cfg: dict, checks, series, timing) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    verdict = FAIL if any(c.status == FAIL for c in checks) else "pass"
    result = {
        "tool": "lusinlab",
        "version": __version__,
        "suite": suite,
        "config": cfg,
        "verdict": verdict,
        "counts": {s: sum(c.status == s for c in checks) for s in sorted({c.status for c in checks})},
        "checks": [c.as_record() for c in checks],
    }
    (out / "result.json").write_text(json.dumps(result, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    with open(out / "checks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["suite", "name", "status", "value", "target", "relation", "tolerance"])
        for c in checks:
            rec = c.as_record()
            w.writerow([rec["suite"], rec["name"], rec["status"], _fmt(rec["value"]),
                        _fmt(rec["target"]), rec["relation"], _fmt(rec["tolerance"])])
    for name, (header, x, y) in series.items():
        lines = [f"# lusinlab {__version__} suite={suite}", f"# {header}"]
        lines += [f"{xi!r} {yi!r}" for xi, yi in zip(np.asarray(x, dtype=float).tolist(),
                                                     np.asarray(y, dtype=float).tolist())]
        (out / f"{name}.dat").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    return result


def run_suite(cfg: dict, suite: str, out: Path, jobs: int = 1) -> dict:
    names = SUITES if suite == "all" else (suite,)
    checks, series, timing = [], {}, {"suites": {}, "checks": {}}
    for name in names:
        t0 = time.perf_counter()
        res = RUNNERS[name](cfg, jobs)
        timing["suites"][name] = time.perf_counter() - t0
        checks.extend(res.checks)
        series.update(res.series)
        for c in res.checks:
            timing["checks"][f"{c.suite}/{c.name}"] = c.wall
            log.info("%-5s %s/%s value=%s tol=%s", c.status.upper(), c.suite, c.name, c.value, c.tolerance)
    return write_outputs(out, suite, cfg, checks, series, timing)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _suite_name(value: str, allow_all: bool) -> str:
    known = list(SUITES) + (["all"] if allow_all else [])
    if value not in known:
        hint = difflib.get_close_matches(value, known, n=3)
        msg = f"unknown suite {value!r}; choose from {', '.join(known)}"
        if hint:
            msg += f" (did you mean {', '.join(hint)}?)"
        raise ConfigError(msg)
    return value


def describe(suite: str) -> str:
    suite = _suite_name(suite, allow_all=False)
    text, knobs = DESCRIPTIONS[suite]
    lines = [f"suite: {suite}", "", text, "", "knobs (defaults):"]
    for k in knobs:
        sec, key = k.split(".")
        lines.append(f"  {k} = {DEFAULTS[sec][key]!r}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lusinlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lusinlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a suite and write reports")
    run.add_argument("--suite", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--out", default="lusinlab-out")
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    desc = sub.add_parser("describe", help="explain what a suite checks")
    desc.add_argument("--suite", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "describe":
            print(describe(args.suite))
            return 0
        suite = _suite_name(args.suite, allow_all=True)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
            _validate(cfg)
        jobs = args.jobs
        if jobs is None:
            env = os.environ.get(JOBS_ENV, "1")
            try:
                jobs = int(env)
            except ValueError:
                raise ConfigError(f"{JOBS_ENV}={env!r} is not an integer") from None
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as exc:
        print(f"lusinlab: error: {exc}", file=sys.stderr)
        return 2
    result = run_suite(cfg, suite, Path(args.out), jobs)
    counts = ", ".join(f"{k}={v}" for k, v in result["counts"].items())
    print(f"{suite}: {result['verdict']} ({counts}) -> {args.out}")
    return 1 if result["verdict"] == FAIL else 0


if __name__ == "__main__":
    sys.exit(main())
