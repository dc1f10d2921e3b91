"""Acceptance suites driven by the command line runner.

Every suite returns an ordered list of :class:`Check` records plus plot
series.  Numeric results depend only on the configuration, so re-running a
suite reproduces every value bit for bit.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import flow as fl
from .exceptions import HypothesisViolation
from .fractional import (
    jt_bound_check,
    kernel_abs_integral,
    representation_check,
    riesz_empirical,
    scalar_identity_check,
)
from .gauss import GaussianSpace, HermiteFunction, sample
from .lusin import LusinVariant, brute_force_best_constant, build_weight, lipschitz_probe, make_pairs
from .semigroup import (
    SemigroupKind,
    apply_pointwise,
    apply_spectral,
    contraction_probe,
    harnack_probe,
    log_convexity_probe,
)

SUITES = ("kernel", "semigroup", "fractional", "lusin", "flow")

PASS, FAIL, SKIP = "pass", "fail", "skip"
HYPOTHESIS_VIOLATED = "hypothesis-violated"


@dataclass
class Check:
    suite: str
    name: str
    status: str
    value: float
    tolerance: float
    relation: str
    target: float | None = None
    detail: dict = field(default_factory=dict)
    wall: float = 0.0

    def as_record(self) -> dict:
        rec = {
            "suite": self.suite,
            "name": self.name,
            "status": self.status,
            "value": _clean(self.value),
            "target": _clean(self.target),
            "relation": self.relation,
            "tolerance": _clean(self.tolerance),
        }
        if self.detail:
            rec["detail"] = {k: _clean(v) for k, v in self.detail.items()}
        return rec


def _clean(v):
    if v is None or isinstance(v, (str, bool)):
        return v
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in np.asarray(v).tolist()]
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


@dataclass
class SuiteOutput:
    checks: list[Check]
    series: dict[str, tuple[str, np.ndarray, np.ndarray]] = field(default_factory=dict)


def _timed(fn: Callable[[], list[Check]]) -> list[Check]:
    t0 = time.perf_counter()
    out = fn()
    dt = time.perf_counter() - t0
    for c in out:
        c.wall = dt / max(len(out), 1)
    return out


def _parallel(tasks: list[Callable[[], list[Check]]], jobs: int) -> list[Check]:
    """Run independent checks; results keep declaration order."""
    if jobs <= 1:
        results = [_timed(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_timed, tasks))
    return [c for group in results for c in group]


def _space(cfg: dict) -> GaussianSpace:
    return GaussianSpace(cfg["space"]["lam"])


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------

def run_kernel(cfg: dict, jobs: int = 1) -> SuiteOutput:
    kc = cfg["kernel"]
    tol = kc["tol"]
    times = list(kc["times"])

    def one(t):
        def task():
            value = kernel_abs_integral(t)
            target = 4.0 / math.sqrt(math.pi) * math.sqrt(t)
            gap = abs(value - target)
            return [Check("kernel", f"kernel_abs_integral[t={t:g}]", _verdict(gap < tol), value,
                          tol, "abs_gap<", target, {"gap": gap})]
        return task

    checks = _parallel([one(t) for t in times], jobs)
    fine = np.geomspace(min(times), max(times), 41)
    series = {"kernel_mass": ("t  integral_of_abs_K", fine, np.array([kernel_abs_integral(t) for t in fine]))}
    return SuiteOutput(checks, series)


# ---------------------------------------------------------------------------
# semigroup
# ---------------------------------------------------------------------------

def _random_function(rng, max_d: int, max_degree: int, lam_choices=(0.5, 1.0, 2.0)):
    d = int(rng.integers(1, max_d + 1))
    lam = [float(rng.choice(lam_choices)) for _ in range(d)]
    space = GaussianSpace(lam)
    deg = int(rng.integers(1, max_degree + 1))
    return HermiteFunction.random(space, deg, rng, scale=1.0 / math.sqrt(deg + 1))


def run_semigroup(cfg: dict, jobs: int = 1) -> SuiteOutput:
    sc = cfg["semigroup"]
    seed = cfg["run"]["seed"]
    rng = np.random.Generator(np.random.Philox(seed))
    funcs = [_random_function(rng, sc["max_dim"], sc["max_degree"]) for _ in range(sc["n_functions"])]
    times = np.geomspace(sc["t_min"], sc["t_max"], sc["n_times"])
    points = [rng.standard_normal((4, f.space.d)) * f.space.sqrt_lam for f in funcs]

    def agreement():
        worst = 0.0
        for f, x in zip(funcs, points):
            for kind in (SemigroupKind.da_prato(f.space), SemigroupKind.wiener(f.space)):
                for t in times:
                    spec_v = apply_spectral(kind, f, float(t))(x)
                    meh = apply_pointwise(kind, f, float(t), x, estimate_error=False).value
                    worst = max(worst, float(np.max(np.abs(spec_v - meh))))
        tol = sc["agreement_tol"]
        return [Check("semigroup", "spectral_vs_mehler", _verdict(worst < tol), worst, tol, "max_abs<")]

    def contraction():
        worst = {"daprato": 0.0, "wiener": 0.0}
        n_conf = 0
        for f, x in zip(funcs, points):
            for name, kind in (("daprato", SemigroupKind.da_prato(f.space)), ("wiener", SemigroupKind.wiener(f.space))):
                for t in times[:: max(1, len(times) // 4)]:
                    worst[name] = max(worst[name], contraction_probe(kind, f, float(t), x).max_ratio)
                    n_conf += x.shape[0]
        tol = sc["contraction_tol"]
        # linear f on isotropic spaces: both estimates are equalities
        eq_gap = 0.0
        crng = np.random.Generator(np.random.Philox(seed + 3))
        for k in range(20):
            d = 1 + k % sc["max_dim"]
            sp = GaussianSpace(np.full(d, 0.5 + 0.1 * k))
            f = HermiteFunction.linear(sp, crng.standard_normal(d))
            x = crng.standard_normal((4, d))
            for kind in (SemigroupKind.da_prato(sp), SemigroupKind.wiener(sp)):
                for t in times:
                    eq_gap = max(eq_gap, abs(contraction_probe(kind, f, float(t), x).max_ratio - 1.0))
        return [
            Check("semigroup", "gradient_contraction", _verdict(worst["daprato"] <= 1 + tol), worst["daprato"],
                  tol, "ratio<=1+", detail={"configurations": n_conf // 2}),
            Check("semigroup", "wiener_commutation", _verdict(worst["wiener"] <= 1 + tol), worst["wiener"],
                  tol, "ratio<=1+", detail={"configurations": n_conf // 2}),
            Check("semigroup", "contraction_linear_equality", _verdict(eq_gap < 1e-10), eq_gap, 1e-10,
                  "|ratio-1|<"),
        ]

    def log_convexity():
        lrng = np.random.Generator(np.random.Philox(seed + 1))
        space = GaussianSpace([1.0, 0.5])
        worst = -math.inf
        sharp = []
        n = sc["n_convexity"]
        for _ in range(n):
            c = lrng.standard_normal(2) * 0.7
            g = lambda y, c=c: np.exp(y @ c)
            x0, x1 = lrng.standard_normal(2), lrng.standard_normal(2)
            s, t = float(lrng.uniform(0.05, 0.95)), float(np.exp(lrng.uniform(-3, 1.5)))
            kind = SemigroupKind.wiener(space) if lrng.random() < 0.5 else SemigroupKind.da_prato(space)
            res = log_convexity_probe(kind, g, x0, x1, s, t)
            worst = max(worst, res.lhs / res.rhs_t - 1.0)
            if math.isfinite(res.sharp_constant):
                sharp.append(res.sharp_constant)
        tol = 1e-10
        return [Check("semigroup", "log_convexity_t_form", _verdict(worst <= tol), worst, tol,
                      "lhs/rhs-1<=", detail={"sharp_constant_max": max(sharp),
                                             "half_t_form_constant": 0.5, "t_form_constant": 1.0})]

    def harnack():
        hrng = np.random.Generator(np.random.Philox(seed + 2))
        space = GaussianSpace.standard(2)
        worst = -math.inf
        for _ in range(sc["n_harnack"]):
            c = hrng.standard_normal(2) * 0.5
            g = lambda y, c=c: 1.0 + np.sin(y @ c) ** 2
            alpha = float(hrng.choice([1.1, 1.5, 2.0]))
            t = float(np.exp(hrng.uniform(-2, 1)))
            x, y = hrng.standard_normal(2), hrng.standard_normal(2)
            lhs, rhs = harnack_probe(space, g, alpha, t, x, y)
            worst = max(worst, lhs / rhs - 1.0)
        tol = 1e-10
        return [Check("semigroup", "harnack_ou", _verdict(worst <= tol), worst, tol, "lhs/rhs-1<=")]

    checks = _parallel([agreement, contraction, log_convexity, harnack], jobs)
    f0 = funcs[0]
    kind0 = SemigroupKind.da_prato(f0.space)
    x0 = points[0][:1]
    vals = np.array([float(apply_spectral(kind0, f0, float(t))(x0)[0]) for t in times])
    return SuiteOutput(checks, {"semigroup_trace": ("t  P_t_f(x0)", times, vals)})


# ---------------------------------------------------------------------------
# fractional
# ---------------------------------------------------------------------------

def run_fractional(cfg: dict, jobs: int = 1) -> SuiteOutput:
    fc = cfg["fractional"]
    seed = cfg["run"]["seed"]

    def scalar():
        worst = 0.0
        for b in fc["b_values"]:
            for t in fc["t_values"]:
                res = scalar_identity_check(float(b), float(t))
                worst = max(worst, res.gap, res.shift_gap)
        tol = fc["scalar_tol"]
        return [Check("fractional", "scalar_identity", _verdict(worst < tol), worst, tol, "max_gap<")]

    def representation():
        rng = np.random.Generator(np.random.Philox(seed + 10))
        worst = 0.0
        for _ in range(fc["n_representation"]):
            f = _random_function(rng, 2, 5)
            kinds = (SemigroupKind.da_prato(f.space), SemigroupKind.wiener(f.space))
            kind = kinds[int(rng.integers(0, 2))]
            t = float(np.exp(rng.uniform(np.log(1e-2), np.log(10.0))))
            x = rng.standard_normal(f.space.d) * f.space.sqrt_lam
            worst = max(worst, representation_check(kind, f, t, x).gap)
        tol = fc["representation_tol"]
        return [Check("fractional", "representation_formula", _verdict(worst < tol), worst, tol, "max_gap<")]

    def jt():
        rng = np.random.Generator(np.random.Philox(seed + 11))
        worst = 0.0
        n = 0
        for _ in range(fc["n_jt_functions"]):
            f = _random_function(rng, 2, 5)
            pts = rng.standard_normal((fc["n_jt_points"], f.space.d)) * f.space.sqrt_lam
            times = np.geomspace(1e-3, 10.0, fc["n_jt_times"])
            for kind in (SemigroupKind.da_prato(f.space), SemigroupKind.wiener(f.space)):
                rep = jt_bound_check(kind.killed_version, f, pts, times)
                worst = max(worst, rep.max_ratio)
                n += pts.shape[0] * times.size
        tol = fc["jt_tol"]
        return [Check("fractional", "jt_maximal_bound", _verdict(worst <= 1 + tol), worst, tol,
                      "ratio<=1+", detail={"samples": n})]

    def riesz():
        rng = np.random.Generator(np.random.Philox(seed + 12))
        worst = {"wiener": 0.0, "daprato": 0.0}
        for _ in range(fc["n_riesz"]):
            f = _random_function(rng, 2, 5)
            w = riesz_empirical(SemigroupKind.wiener(f.space), f, 2.0).energy_factor
            worst["wiener"] = max(worst["wiener"], abs(w - 1.0))
            dp = riesz_empirical(SemigroupKind.da_prato(f.space), f, 2.0).energy_factor
            worst["daprato"] = max(worst["daprato"], abs(dp - 0.5))
        tol = fc["riesz_tol"]
        return [
            Check("fractional", "dirichlet_energy_wiener", _verdict(worst["wiener"] < tol),
                  worst["wiener"], tol, "abs_gap<", 1.0),
            Check("fractional", "dirichlet_energy_daprato", _verdict(worst["daprato"] < tol),
                  worst["daprato"], tol, "abs_gap<", 0.5),
        ]

    checks = _parallel([scalar, representation, jt, riesz], jobs)
    t = np.geomspace(1e-2, 10.0, 33)
    gaps = np.array([scalar_identity_check(1.0, float(s)).gap for s in t])
    return SuiteOutput(checks, {"scalar_identity_gap": ("t  gap_b=1", t, gaps)})


# ---------------------------------------------------------------------------
# lusin
# ---------------------------------------------------------------------------

def lusin_family(name: str, space: GaussianSpace) -> HermiteFunction:
    """Test functions: ``h1``, ``h2``, ``h3`` on the first axis, or ``exp``
    (degree-6 projection of ``exp(x_1 / 2)``)."""
    d = space.d
    if name in ("h1", "h2", "h3"):
        n = int(name[1])
        return HermiteFunction.basis(space, (n,) + (0,) * (d - 1))
    if name == "exp":
        s = math.sqrt(space.lam[0])
        return HermiteFunction.project(space, lambda x: np.exp(0.5 * x[:, 0] / s), 6)
    raise ValueError(f"unknown test family {name!r}")


def lusin_pair_probe(variant: LusinVariant, f: HermiteFunction, n_points: int, n_pairs: int,
                     seed: int, exhaustive: bool = True):
    """Sampled probe over cloud pairs, and optionally the exhaustive maximum."""
    cloud = sample(f.space, n_points, seed)
    weight = build_weight(variant, f, cloud)
    pairs = make_pairs(cloud, n_pairs, seed)
    report = lipschitz_probe(variant, f, weight, pairs, seed=seed)
    best = brute_force_best_constant(variant, f, weight) if exhaustive else None
    return report, best


def run_lusin(cfg: dict, jobs: int = 1) -> SuiteOutput:
    lc = cfg["lusin"]
    seed = cfg["run"]["seed"]
    series = {}

    def one(variant_name, family, dim):
        def task():
            variant = LusinVariant(variant_name)
            space = GaussianSpace.standard(dim) if variant is LusinVariant.RCD else GaussianSpace(
                cfg["space"]["lam"][:dim] if len(cfg["space"]["lam"]) >= dim else [1.0] * dim)
            f = lusin_family(family, space)
            report, best = lusin_pair_probe(variant, f, lc["n_points"], lc["n_pairs"], seed)
            rel = abs(report.max_ratio - best) / best if best > 0 else 0.0
            seeds = [seed + k for k in range(lc["n_seeds"])]
            maxima = [report.max_ratio] + [
                lusin_pair_probe(variant, f, lc["n_points"], lc["n_pairs"], s, exhaustive=False)[0].max_ratio
                for s in seeds[1:]
            ]
            spread = (max(maxima) - min(maxima)) / np.median(maxima)
            name = f"{variant.value}/{family}/d{dim}"
            series[f"lusin_hist_{variant.value}_{family}_d{dim}"] = (
                "ratio_bin_center  count",
                0.5 * (report.hist_edges[1:] + report.hist_edges[:-1]),
                report.hist_counts.astype(float),
            )
            return [
                Check("lusin", f"{name}/vs_exhaustive", _verdict(math.isfinite(report.max_ratio)
                      and rel <= lc["exhaustive_tol"]), report.max_ratio, lc["exhaustive_tol"],
                      "rel_gap<=", best, {"rel_gap": rel, "bootstrap_lo": report.bootstrap_interval[0],
                                          "bootstrap_hi": report.bootstrap_interval[1]}),
                Check("lusin", f"{name}/seed_stability", _verdict(spread <= lc["seed_tol"]), spread,
                      lc["seed_tol"], "rel_spread<=", detail={"maxima": maxima}),
            ]
        return task

    tasks = [one(v, fam, dim) for v in lc["variants"] for fam in lc["families"] for dim in lc["dims"]]
    checks = _parallel(tasks, jobs)
    return SuiteOutput(checks, dict(sorted(series.items())))


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------

def run_flow(cfg: dict, jobs: int = 1) -> SuiteOutput:
    fc = cfg["flow"]
    seed = cfg["run"]["seed"]
    space = GaussianSpace([1.0, 1.0])
    T = fc["horizon"]
    omega = fc["omega"]
    dt = fc["dt"]
    series = {}
    checks: list[Check] = []

    # integrator accuracy and order
    t0 = time.perf_counter()
    rot = fl.FlowFieldSpec.rotation(space, omega, T)
    small = sample(space, 1000, seed)
    steps = [0.1, 0.05, 0.025, 0.0125]
    errs = []
    for h in steps:
        ens = fl.integrate_flow(rot, small, h, n_saved=2)
        errs.append(float(np.max(np.abs(ens.states[-1] - rot.exact_flow(T, small.points)))))
    order = float(np.min(np.log2(np.array(errs[:-1]) / np.array(errs[1:]))))
    err_dt = float(np.max(np.abs(fl.integrate_flow(rot, small, dt, n_saved=2).states[-1]
                                 - rot.exact_flow(T, small.points))))
    wall = time.perf_counter() - t0
    checks.append(Check("flow", f"rk4_error[dt={dt:g}]", _verdict(err_dt < fc["integrator_tol"]), err_dt,
                        fc["integrator_tol"], "max_abs<", wall=wall / 2))
    checks.append(Check("flow", "rk4_order", _verdict(order >= fc["min_order"]), order, fc["min_order"],
                        "order>=", detail={"errors": errs}, wall=wall / 2))
    series["rk4_convergence"] = ("dt  max_error", np.array(steps), np.array(errs))

    cloud = sample(space, fc["cloud_size"], seed, jobs=jobs)
    p = fc["p"]

    def sweep(label, make_pair, eps_values, runner, norm_mode="ambient"):
        cp = None
        ends = []
        for eps in eps_values:
            t1 = time.perf_counter()
            b, bb = make_pair(eps)
            name = f"{label}[eps={eps:g}]"
            try:
                if cp is None:
                    cp = fl.flow_lusin_constant(b, p, norm_mode, seed=seed)
                rep = runner(b, bb, cp)
            except HypothesisViolation as exc:
                checks.append(Check("flow", name, HYPOTHESIS_VIOLATED, math.nan, 1.0, "delta<",
                                    detail={"reason": str(exc)}, wall=time.perf_counter() - t1))
                continue
            ends.append((eps, rep.lhs[-1]))
            checks.append(Check(
                "flow", name, _verdict(rep.passed), float(rep.lhs.max()), rep.rhs, "lhs<=C/|log delta|",
                detail={"delta": rep.delta, "C1": rep.C1, "C": rep.C, "C_stated": rep.C_stated,
                        "phi_max": float(rep.phi.max()), "L": rep.L, "L_bar": rep.L_bar,
                        "Cp_raw": rep.cp.raw, "Cp_weight_ratio": rep.cp.weight_ratio,
                        "Cp_inflated": rep.cp.inflated, "chebyshev_ok": rep.chebyshev.passed,
                        "phi_ok": rep.phi_ok, "bound_ok": rep.bound_ok},
                wall=time.perf_counter() - t1))
            series[f"{label}_lhs_eps{eps:g}"] = ("t  lhs", rep.times, rep.lhs)
            series[f"{label}_phi_eps{eps:g}"] = ("t  phi", rep.times, rep.phi)
        if len(ends) >= 2:
            ends.sort(key=lambda e: -e[0])
            vals = np.array([e[1] for e in ends])
            mono = bool(np.all(np.diff(vals) <= 0))
            checks.append(Check("flow", f"{label}/lhs_T_monotone", _verdict(mono), float(vals[-1]), 0.0,
                                "nonincreasing", detail={"lhs_T": vals}))
            series[f"{label}_lhs_T"] = ("epsilon  lhs_T", np.array([e[0] for e in ends]), vals)

    eps_values = fc["epsilons"]
    sweep("rotation",
          lambda e: (rot, fl.FlowFieldSpec.perturbed_rotation(space, omega, e, horizon=T)),
          eps_values,
          lambda b, bb, cp: fl.stability_check(b, bb, p, cloud, dt, cp=cp))

    aniso = GaussianSpace(fc["cm_lam"])
    cloud_cm = sample(aniso, fc["cloud_size"], seed, jobs=jobs)
    rot_cm = fl.FlowFieldSpec.rotation(aniso, omega, T)
    sweep("rotation_cm",
          lambda e: (rot_cm, fl.FlowFieldSpec.perturbed_rotation(aniso, omega, e, horizon=T)),
          fc["cm_epsilons"],
          lambda b, bb, cp: fl.stability_check(b, bb, p, cloud_cm, dt, "cameron_martin", cp=cp),
          norm_mode="cameron_martin")

    a = fc["shear_a"]
    shear = fl.FlowFieldSpec.shear(space, a, T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sweep("shear_lr",
              lambda e: (shear, fl.FlowFieldSpec.shear(space, a * (1.0 + e), T)),
              fc["lr_epsilons"],
              lambda b, bb, cp: fl.lr_stability_check(b, bb, fc["r"], p, cloud, dt, cp=cp))
    return SuiteOutput(checks, series)


RUNNERS = {
    "kernel": run_kernel,
    "semigroup": run_semigroup,
    "fractional": run_fractional,
    "lusin": run_lusin,
    "flow": run_flow,
}
