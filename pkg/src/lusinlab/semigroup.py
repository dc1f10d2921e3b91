"""Ornstein-Uhlenbeck semigroups on a diagonal Gaussian space.

Two normalisations are provided.  The Da Prato semigroup ``P_t`` has drift
``A = -Q^{-1}/2`` and Mehler form ``P_t f(x) = E f(e^{At}x + Y)`` with
``Y ~ N(0, Q(1 - e^{2At}))``; the Wiener semigroup ``T_t`` is
``T_t f(x) = E f(e^{-t}x + sqrt(1 - e^{-2t}) Y)`` with ``Y ~ N_Q``.  The
"killed" variants are ``e^{-t}P_t`` and ``e^{-t}T_t``.

On the Hermite basis both are diagonal: ``h_alpha`` is an eigenfunction with
eigenvalue ``exp(-mu(alpha) t)`` where

    P: mu = sum_i alpha_i / (2 lam_i)     T: mu = |alpha|

and the killed variants add one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import NodeBudgetError
from .gauss import (
    GaussianSpace,
    HermiteFunction,
    as_points,
    cm_norm,
    gauss_quadrature,
    multi_indices,
    hermite_features,
)

DEFAULT_GRID_POINTS = 64
DEFAULT_GRID_RANGE = (1e-4, 1e2)
DEGENERATE = 1e-12
_MEHLER_CHUNK = 1 << 20


class Variant(str, enum.Enum):
    DA_PRATO = "P"
    WIENER = "T"
    KILLED_P = "killed-P"
    KILLED_T = "killed-T"


@dataclass(frozen=True)
class SemigroupKind:
    """A semigroup variant attached to a Gaussian space."""

    variant: Variant
    space: GaussianSpace

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))

    @classmethod
    def da_prato(cls, space: GaussianSpace) -> "SemigroupKind":
        return cls(Variant.DA_PRATO, space)

    @classmethod
    def wiener(cls, space: GaussianSpace) -> "SemigroupKind":
        return cls(Variant.WIENER, space)

    @property
    def killed(self) -> bool:
        return self.variant in (Variant.KILLED_P, Variant.KILLED_T)

    @property
    def is_wiener(self) -> bool:
        return self.variant in (Variant.WIENER, Variant.KILLED_T)

    @property
    def base(self) -> "SemigroupKind":
        return SemigroupKind(Variant.WIENER if self.is_wiener else Variant.DA_PRATO, self.space)

    @property
    def killed_version(self) -> "SemigroupKind":
        return SemigroupKind(Variant.KILLED_T if self.is_wiener else Variant.KILLED_P, self.space)

    @property
    def spectral_gap(self) -> float:
        """Smallest nonzero multiplier of the non-killed part."""
        return 1.0 if self.is_wiener else 0.5 / self.space.lambda_max

    def multiplier(self, indices: np.ndarray) -> np.ndarray:
        """``mu(alpha)`` for each row of ``indices``."""
        idx = np.asarray(indices, dtype=float).reshape(-1, self.space.d)
        if self.is_wiener:
            mu = idx.sum(axis=1)
        else:
            mu = idx @ (0.5 / self.space.lam_array)
        return mu + 1.0 if self.killed else mu

    def mehler_parameters(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis mean contraction and noise variance of the Mehler kernel."""
        lam = self.space.lam_array
        if self.is_wiener:
            a = np.full(self.space.d, math.exp(-t))
            var = lam * -math.expm1(-2.0 * t)
        else:
            a = np.exp(-0.5 * t / lam)
            var = lam * -np.expm1(-t / lam)
        return a, var


class SemigroupEvalReport(NamedTuple):
    value: np.ndarray | float
    method: str
    error_estimate: np.ndarray | float


def time_grid(n: int = DEFAULT_GRID_POINTS, t_min: float = DEFAULT_GRID_RANGE[0],
              t_max: float = DEFAULT_GRID_RANGE[1]) -> np.ndarray:
    """Logarithmic time grid used for suprema over ``t > 0``."""
    return np.geomspace(t_min, t_max, n)


def default_order(d: int) -> int:
    return {1: 64, 2: 32, 3: 16}.get(d, 6)


# ---------------------------------------------------------------------------
# Spectral action
# ---------------------------------------------------------------------------

def apply_spectral(kind: SemigroupKind, f: HermiteFunction, t: float) -> HermiteFunction:
    """Exact semigroup action on a Hermite expansion."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return f
    mu = kind.multiplier(f.indices)
    return f.with_values(f.values * np.exp(-mu * t))


def mode_matrix(kind: SemigroupKind, f: HermiteFunction, x) -> tuple[np.ndarray, np.ndarray]:
    """Group the expansion of ``f`` at ``x`` by semigroup multiplier.

    Returns ``(mu, C)`` with ``R_t f(x) = C @ exp(-mu t)``, which makes whole
    time grids cheap to evaluate.
    """
    mu_all = kind.multiplier(f.indices)
    keys = np.round(mu_all, 12)
    mu, inverse = np.unique(keys, return_inverse=True)
    feats = hermite_features(f.space, f.max_degree, x) * f.values
    C = np.zeros((feats.shape[0], mu.shape[0]))
    np.add.at(C.T, inverse, feats.T)
    return mu, C


def gradient(f: HermiteFunction) -> list[HermiteFunction]:
    """Exact partial derivatives using ``h_n' = sqrt(n) h_{n-1}``."""
    space = f.space
    n_out = max(f.max_degree - 1, 0)
    out_idx = multi_indices(space.d, n_out)
    lookup = {tuple(int(v) for v in a): k for k, a in enumerate(out_idx)}
    parts = []
    for i in range(space.d):
        vals = np.zeros(out_idx.shape[0])
        scale = 1.0 / space.sqrt_lam[i]
        for a, c in zip(f.indices, f.values):
            if a[i] == 0 or c == 0.0:
                continue
            b = list(int(v) for v in a)
            b[i] -= 1
            vals[lookup[tuple(b)]] += math.sqrt(a[i]) * scale * c
        parts.append(HermiteFunction(space, n_out, vals))
    return parts


def _as_components(f) -> list[HermiteFunction]:
    return [f] if isinstance(f, HermiteFunction) else list(f)


def gradient_norm(f, x, cameron_martin: bool = False) -> np.ndarray:
    """Pointwise ``|∇f|`` or ``|D_H f|_H = |Q^{1/2}∇f|``.

    For a list of components the Hilbert-Schmidt norm is returned.
    """
    comps = _as_components(f)
    space = comps[0].space
    pts = as_points(space, x)
    weights = space.lam_array if cameron_martin else np.ones(space.d)
    total = np.zeros(pts.shape[0])
    for comp in comps:
        for w, part in zip(weights, gradient(comp)):
            total += w * part(pts) ** 2
    return np.sqrt(total)


def gamma_t(space: GaussianSpace, t: float) -> np.ndarray:
    """Diagonal of ``Q^{-1/2}(1 - e^{2At})^{-1/2} e^{At}``."""
    lam = space.lam_array
    # e^{-t/(2 lam)} / sqrt(lam (1 - e^{-t/lam})), safe for large t/lam
    return np.exp(-0.5 * t / lam) / np.sqrt(-lam * np.expm1(-t / lam))


# ---------------------------------------------------------------------------
# Mehler quadrature
# ---------------------------------------------------------------------------

def _mehler_rule_average(kind, func, t, pts, order):
    a, var = kind.mehler_parameters(t)
    noise = gauss_quadrature(GaussianSpace(np.maximum(var, 1e-300)), order)
    k = len(noise)
    per_chunk = max(1, _MEHLER_CHUNK // k)
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], per_chunk):
        chunk = pts[start : start + per_chunk]
        arg = (chunk * a)[:, None, :] + noise.nodes[None, :, :]
        vals = np.asarray(func(arg.reshape(-1, kind.space.d)), dtype=float)
        out[start : start + per_chunk] = vals.reshape(chunk.shape[0], k) @ noise.weights
    return out


def _mehler_mc_average(kind, func, t, pts, n_samples, seed):
    a, var = kind.mehler_parameters(t)
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n_samples, kind.space.d)) * np.sqrt(var)
    mean = np.empty(pts.shape[0])
    err = np.empty(pts.shape[0])
    for i, x in enumerate(pts):
        vals = np.asarray(func(x * a + z), dtype=float)
        mean[i] = vals.mean()
        err[i] = vals.std(ddof=1) / math.sqrt(n_samples)
    return mean, err


def apply_pointwise(
    kind: SemigroupKind,
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    x,
    order: int | None = None,
    estimate_error: bool = True,
    monte_carlo: bool = True,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> SemigroupEvalReport:
    """Evaluate ``R_t f`` at ``x`` from the Mehler formula.

    ``f`` is a black box mapping an ``(n, d)`` array to ``n`` values.  The
    integral uses a tensor Gauss-Hermite rule with ``order`` points per axis;
    when the rule exceeds the node budget it falls back to Monte Carlo (or
    raises ``NodeBudgetError`` if ``monte_carlo`` is false).  The error
    estimate is the difference to a coarser rule, or the Monte Carlo
    standard error.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    space = kind.space
    pts = as_points(space, x)
    scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and pts.shape[0] == 1)
    if order is None:
        order = default_order(space.d)

    def _wrap(value, method, err):
        if scalar:
            return SemigroupEvalReport(float(value[0]), method, float(err[0]))
        return SemigroupEvalReport(value, method, err)

    if t == 0:
        return _wrap(np.asarray(f(pts), dtype=float), "quadrature", np.zeros(pts.shape[0]))

    decay = math.exp(-t) if kind.killed else 1.0
    if order**space.d > space.node_budget:
        if not monte_carlo:
            raise NodeBudgetError(
                f"Mehler rule with {order}^{space.d} nodes exceeds the budget "
                f"of {space.node_budget}"
            )
        value, err = _mehler_mc_average(kind, f, t, pts, mc_samples, seed)
        return _wrap(decay * value, "monte-carlo", decay * err)

    value = _mehler_rule_average(kind, f, t, pts, order)
    if estimate_error and order > 2:
        coarse = _mehler_rule_average(kind, f, t, pts, max(1, order - max(2, order // 4)))
        err = np.abs(value - coarse)
    else:
        err = np.zeros_like(value)
    return _wrap(decay * value, "quadrature", decay * err)


def mehler_average(kind: SemigroupKind, f, t: float, x, order: int | None = None) -> np.ndarray:
    """Vectorised ``R_t f(x)`` without error estimation."""
    rep = apply_pointwise(kind, f, t, as_points(kind.space, x), order=order, estimate_error=False)
    return np.asarray(rep.value)


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

class ContractionResult(NamedTuple):
    max_ratio: float
    ratios: np.ndarray
    n_skipped: int


def contraction_probe(
    kind: SemigroupKind,
    f: HermiteFunction,
    t: float,
    points,
    order: int | None = None,
) -> ContractionResult:
    """Worst-case ratio in the gradient contraction estimate.

    Da Prato: ``|∇P_t f| / (e^{-t/(2 lam_max)} P_t|∇f|)``.  Wiener:
    ``|D_H T_t f|_H / (e^{-t} T_t|D_H f|_H)``.  Killed variants reduce to
    their base semigroup because the factor ``e^{-t}`` cancels.
    """
    if t <= 0:
        raise ValueError("contraction probe needs t > 0")
    base = kind.base
    pts = points.points if hasattr(points, "points") else as_points(kind.space, points)
    cm = base.is_wiener
    num = gradient_norm(apply_spectral(base, f, t), pts, cameron_martin=cm)
    factor = math.exp(-t) if cm else math.exp(-0.5 * t / kind.space.lambda_max)
    den = factor * mehler_average(
        base, lambda y: gradient_norm(f, y, cameron_martin=cm), t, pts, order
    )
    ok = den > DEGENERATE
    ratios = np.full(pts.shape[0], np.nan)
    ratios[ok] = num[ok] / den[ok]
    max_ratio = float(np.max(ratios[ok])) if ok.any() else 0.0
    return ContractionResult(max_ratio, ratios, int((~ok).sum()))


class LogConvexityResult(NamedTuple):
    lhs: float
    rhs_half_t: float
    rhs_t: float
    sharp_constant: float


def _check_nonnegative(g, nodes):
    vals = np.asarray(g(nodes), dtype=float)
    if np.any(vals < 0):
        raise ValueError("test function must be nonnegative on the quadrature nodes")


def log_convexity_probe(
    kind: SemigroupKind,
    g: Callable[[np.ndarray], np.ndarray],
    x0,
    x1,
    s: float,
    t: float,
    order: int | None = None,
) -> LogConvexityResult:
    """Both candidate forms of the log-convexity bound for ``R_t g``.

    Returns ``lhs = R_t g(x_s)`` and ``exp(s(1-s)|x1-x0|^2 / c) *
    R_t g(x0)^{1-s} R_t g(x1)^s`` for ``c = 2t`` and ``c = t``; distances are
    Euclidean for Da Prato and Cameron-Martin for Wiener.  ``sharp_constant``
    is the smallest ``kappa`` with ``lhs <= exp(kappa s(1-s)|h|^2/t) * ...``
    at this configuration (``nan`` when ``s(1-s)|h|^2 = 0``).
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if t <= 0:
        raise ValueError("log-convexity probe needs t > 0")
    space = kind.space
    x0 = np.asarray(x0, dtype=float).reshape(space.d)
    x1 = np.asarray(x1, dtype=float).reshape(space.d)
    xs = (1 - s) * x0 + s * x1
    a, var = kind.mehler_parameters(t)
    rule = gauss_quadrature(GaussianSpace(var), order or default_order(space.d))
    _check_nonnegative(g, np.concatenate([rule.nodes + a * p for p in (x0, x1, xs)]))
    r0, r1, rs = mehler_average(kind, g, t, np.stack([x0, x1, xs]), order)
    h = x1 - x0
    dist2 = cm_norm(space, h) ** 2 if kind.is_wiener else float(h @ h)
    core = r0 ** (1 - s) * r1**s
    spread = s * (1 - s) * dist2
    rhs_half = math.exp(spread / (2 * t)) * core
    rhs_full = math.exp(spread / t) * core
    if spread > 0 and core > 0 and rs > 0:
        sharp = t * math.log(rs / core) / spread
    else:
        sharp = float("nan")
    return LogConvexityResult(float(rs), float(rhs_half), float(rhs_full), sharp)


def sigma_k(K: float, t: float) -> float:
    """``(e^{2Kt} - 1)/K``, with the limit ``2t`` at ``K = 0``."""
    return 2.0 * t if K == 0 else math.expm1(2.0 * K * t) / K


def harnack_probe(
    space: GaussianSpace,
    g: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    t: float,
    x,
    y,
    order: int | None = None,
) -> tuple[float, float]:
    """Wang's dimension-free Harnack inequality for the OU semigroup ``T_t``.

    The Gaussian space with Cameron-Martin distance has curvature bound
    ``K = 1``, so ``sigma_1(t) = e^{2t} - 1``.  Returns ``(lhs, rhs)`` with
    ``lhs = (T_t g)^alpha(x)`` and
    ``rhs = T_t(g^alpha)(y) exp(alpha d(x,y)^2 / (2 sigma_1(t)(alpha-1)))``.
    """
    if alpha <= 1:
        raise ValueError("Harnack exponent must exceed one")
    if t <= 0:
        raise ValueError("Harnack probe needs t > 0")
    kind = SemigroupKind.wiener(space)
    x = np.asarray(x, dtype=float).reshape(space.d)
    y = np.asarray(y, dtype=float).reshape(space.d)
    a, var = kind.mehler_parameters(t)
    rule = gauss_quadrature(GaussianSpace(var), order or default_order(space.d))
    _check_nonnegative(g, np.concatenate([rule.nodes + a * x, rule.nodes + a * y]))
    tg_x = float(mehler_average(kind, g, t, x[None, :], order)[0])
    tga_y = float(
        mehler_average(kind, lambda z: np.asarray(g(z), dtype=float) ** alpha, t, y[None, :], order)[0]
    )
    dist2 = float(cm_norm(space, x - y)) ** 2
    expo = alpha * dist2 / (2.0 * sigma_k(1.0, t) * (alpha - 1.0))
    return tg_x**alpha, tga_y * math.exp(expo)


def semigroup_grid_values(kind: SemigroupKind, f: HermiteFunction, x,
                          times: Sequence[float]) -> np.ndarray:
    """``R_t f(x)`` on a whole time grid, shape ``(n_points, n_times)``."""
    mu, C = mode_matrix(kind, f, x)
    return C @ np.exp(-np.outer(mu, np.asarray(times, dtype=float)))
