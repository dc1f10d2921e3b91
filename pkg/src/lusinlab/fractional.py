"""Subordination kernel and square roots of OU generators.

The kernel

    K(s, t) = pi^{-1/2} (1{s > t} (s - t)^{-1/2} - 1{s > 0} s^{-1/2})

turns ``e^{-bt} - 1`` into ``∫ K(s,t) sqrt(b) e^{-bs} ds`` and hence
``R_t v - v`` into an average of ``R_s sqrt(-L) v``.  Integrals against ``K``
are computed after the substitutions ``s = u^2`` and ``s = t + u^2``, which
remove both inverse square-root singularities, so that

    ∫_0^∞ K(s,t) phi(s) ds = (2/sqrt(pi)) ∫_0^∞ [phi(t + u^2) - phi(u^2)] du.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .exceptions import ConvergenceError, DomainError
from .gauss import HermiteFunction, as_points, gauss_quadrature
from .semigroup import (
    DEGENERATE,
    SemigroupKind,
    apply_spectral,
    default_order,
    gradient_norm,
    mode_matrix,
    time_grid,
)

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class KernelQuadratureConfig:
    """Tolerances for integrals against the subordination kernel.

    ``tail_scale`` fixes the cutoff ``S = t + max(tail_scale, tail_scale /
    decay)`` for exponentially decaying integrands; the discarded remainder is
    bounded analytically and added to the error estimate.
    """

    atol: float = 1e-13
    rtol: float = 1e-12
    limit: int = 400
    tail_scale: float = 50.0

    def __post_init__(self):
        if self.atol <= 0 or self.rtol <= 0:
            raise ValueError("quadrature tolerances must be positive")


DEFAULT_KERNEL_CONFIG = KernelQuadratureConfig()


def kernel_K(s, t: float):
    """Pointwise value of the subordination kernel.

    Raises ``DomainError`` at the singular points ``s = 0`` and ``s = t`` when
    ``t > 0``.
    """
    if t < 0:
        raise DomainError("kernel is defined for t >= 0")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("kernel is defined for s >= 0")
    if t > 0 and np.any((s_arr == 0) | (s_arr == t)):
        raise DomainError(f"kernel is singular at s = 0 and s = t = {t}")
    with np.errstate(divide="ignore", invalid="ignore"):
        late = np.where(s_arr > t, 1.0 / np.sqrt(np.where(s_arr > t, s_arr - t, 1.0)), 0.0)
        early = np.where(s_arr > 0, 1.0 / np.sqrt(np.where(s_arr > 0, s_arr, 1.0)), 0.0)
    out = (late - early) / SQRT_PI
    if t == 0:
        out = np.zeros_like(s_arr)
    return float(out) if out.ndim == 0 else out


def _quad(func, a, b, cfg: KernelQuadratureConfig, points=None):
    kwargs = dict(epsabs=cfg.atol, epsrel=cfg.rtol, limit=cfg.limit, full_output=1)
    if points is not None and np.isfinite(b):
        kwargs["points"] = points
    res = integrate.quad(func, a, b, **kwargs)
    value, err = res[0], res[1]
    if len(res) > 3 and err > max(cfg.atol, cfg.rtol * abs(value)) * 1e3:
        raise ConvergenceError(f"quadrature stalled: {res[3]} (error {err:.3g})")
    return value, err


class KernelIntegral(NamedTuple):
    value: float
    error: float


def kernel_abs_integral(t: float, cfg: KernelQuadratureConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """``∫_0^∞ |K(s,t)| ds`` by adaptive quadrature after desingularisation."""
    return kernel_abs_integral_with_error(t, cfg).value


def kernel_abs_integral_with_error(t: float,
                                   cfg: KernelQuadratureConfig = DEFAULT_KERNEL_CONFIG) -> KernelIntegral:
    if t < 0:
        raise DomainError("kernel is defined for t >= 0")
    if t == 0:
        return KernelIntegral(0.0, 0.0)
    # (0, t): K = -s^{-1/2}/sqrt(pi); with s = u^2 the integrand is 2/sqrt(pi).
    head, e1 = _quad(lambda u: 2.0 / SQRT_PI, 0.0, math.sqrt(t), cfg)
    # (t, ∞): s = t + u^2; 2(1 - u/sqrt(t+u^2)) rewritten without cancellation.
    def tail_integrand(u):
        r = math.sqrt(t + u * u)
        return 2.0 * t / (r * (r + u)) / SQRT_PI
    tail, e2 = _quad(tail_integrand, 0.0, np.inf, cfg)
    return KernelIntegral(head + tail, e1 + e2)


def integrate_against_kernel(
    phi: Callable[[float], float],
    t: float,
    decay: float,
    amplitude: float,
    cfg: KernelQuadratureConfig = DEFAULT_KERNEL_CONFIG,
) -> KernelIntegral:
    """``∫_0^∞ K(s,t) phi(s) ds`` for ``|phi(s)| <= amplitude * e^{-decay s}``.

    The integral is truncated at ``S = t + max(c, c/decay)`` and the
    remainder bound ``amplitude * sqrt(pi/decay) * erfc(sqrt(decay S))``
    (times the ``2/sqrt(pi)`` prefactor) is added to the error.
    """
    if t < 0:
        raise DomainError("kernel is defined for t >= 0")
    if t == 0 or amplitude == 0:
        return KernelIntegral(0.0, 0.0)
    if decay <= 0:
        raise ValueError("integrand must decay exponentially")
    big_s = t + max(cfg.tail_scale, cfg.tail_scale / decay)
    u_max = math.sqrt(big_s)

    def integrand(u):
        return phi(t + u * u) - phi(u * u)

    value, err = _quad(integrand, 0.0, u_max, cfg, points=[math.sqrt(t)])
    # each of phi(t+u^2), phi(u^2) is bounded by amplitude * exp(-decay u^2)
    remainder = amplitude * math.sqrt(math.pi / decay) * special.erfc(math.sqrt(decay) * u_max)
    scale = 2.0 / SQRT_PI
    return KernelIntegral(scale * value, scale * (err + remainder))


class ScalarIdentity(NamedTuple):
    lhs: float
    rhs: float
    gap: float
    shift_lhs: float
    shift_rhs: float
    shift_gap: float


def scalar_identity_check(b: float, t: float,
                          cfg: KernelQuadratureConfig = DEFAULT_KERNEL_CONFIG) -> ScalarIdentity:
    """Compare ``e^{-bt} - 1`` with ``∫ K(s,t) sqrt(b) e^{-bs} ds``.

    Also checks ``e^{-bt} = pi^{-1/2} ∫_t^∞ (s-t)^{-1/2} sqrt(b) e^{-bs} ds``
    for ``b > 0`` (the ``shift_*`` fields; zeros when ``b = 0``).
    """
    if b < 0 or t < 0:
        raise DomainError("identity is stated for b >= 0, t >= 0")
    lhs = math.expm1(-b * t)
    if b == 0:
        return ScalarIdentity(lhs, 0.0, abs(lhs), 0.0, 0.0, 0.0)
    rb = math.sqrt(b)
    rhs = integrate_against_kernel(lambda s: rb * math.exp(-b * s), t, b, rb, cfg).value
    u_max = math.sqrt(max(cfg.tail_scale, cfg.tail_scale / b))
    shifted, _ = _quad(lambda u: rb * math.exp(-b * (t + u * u)), 0.0, u_max, cfg)
    shift_rhs = 2.0 * shifted / SQRT_PI
    shift_lhs = math.exp(-b * t)
    return ScalarIdentity(lhs, rhs, abs(lhs - rhs), shift_lhs, shift_rhs, abs(shift_lhs - shift_rhs))


# ---------------------------------------------------------------------------
# Fractional operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FracOperator:
    """``sqrt(shift - L)`` where ``L`` is the generator of ``kind``.

    With a killed kind and ``shift = 0`` this is ``sqrt(I - L)`` for the
    underlying P or T; the same operator is ``FracOperator(base, 1)``.
    """

    kind: SemigroupKind
    shift: int = 0

    def __post_init__(self):
        if self.shift not in (0, 1):
            raise ValueError("shift must be 0 or 1")

    @classmethod
    def sqrt_minus_generator(cls, kind: SemigroupKind) -> "FracOperator":
        return cls(kind, 0)

    @classmethod
    def sqrt_one_minus_generator(cls, kind: SemigroupKind) -> "FracOperator":
        return cls(kind.base, 1)

    def multiplier(self, indices) -> np.ndarray:
        return np.sqrt(self.shift + self.kind.multiplier(indices))


def apply_frac(op: FracOperator, f: HermiteFunction) -> HermiteFunction:
    """Spectral functional calculus: ``a_alpha -> sqrt(shift + mu) a_alpha``."""
    return f.with_values(f.values * op.multiplier(f.indices))


class RepresentationResult(NamedTuple):
    lhs: float
    rhs: float
    gap: float
    error_estimate: float


def representation_check(
    kind: SemigroupKind,
    f: HermiteFunction,
    t: float,
    x,
    cfg: KernelQuadratureConfig = DEFAULT_KERNEL_CONFIG,
) -> RepresentationResult:
    """Compare ``(R_t f - f)(x)`` with ``∫ K(s,t) R_s sqrt(-L) f(x) ds``.

    ``L`` is the generator of ``kind`` itself (for killed kinds, ``I - L``
    of the underlying semigroup).  The integrand is evaluated spectrally.
    """
    if t < 0:
        raise DomainError("representation formula needs t >= 0")
    pts = as_points(f.space, x)
    if pts.shape[0] != 1:
        raise ValueError("representation_check evaluates a single point")
    lhs = float((apply_spectral(kind, f, t) - f)(pts)[0])
    root = apply_frac(FracOperator(kind, 0), f)
    mu, C = mode_matrix(kind, root, pts)
    c = C[0]
    keep = (mu > 0) & (c != 0)
    mu, c = mu[keep], c[keep]
    if mu.size == 0:
        return RepresentationResult(lhs, 0.0, abs(lhs), 0.0)

    def phi(s):
        return float(np.dot(c, np.exp(-mu * s)))

    res = integrate_against_kernel(phi, t, float(mu.min()), float(np.abs(c).sum()), cfg)
    return RepresentationResult(lhs, res.value, abs(lhs - res.value), res.error)


# ---------------------------------------------------------------------------
# Maximal bound on |R_t f - f|
# ---------------------------------------------------------------------------

def maximal_fractional(
    kind: SemigroupKind,
    f: HermiteFunction,
    x,
    grid: Sequence[float] | None = None,
    shift: int = 0,
) -> np.ndarray:
    """``sup_{s > 0} |R_s sqrt(shift - L) f|(x)`` on a time grid plus limits.

    ``R`` and ``L`` both refer to ``kind``.  The ``s -> 0`` limit is
    ``|sqrt(shift - L) f(x)|`` and the ``s -> ∞`` limit keeps only modes
    with zero multiplier.
    """
    grid = time_grid() if grid is None else np.asarray(grid, dtype=float)
    root = apply_frac(FracOperator(kind, shift), f)
    mu, C = mode_matrix(kind, root, x)
    vals = np.abs(C @ np.exp(-np.outer(mu, grid)))
    at_zero = np.abs(C.sum(axis=1))
    at_inf = np.abs(C[:, mu == 0].sum(axis=1))
    return np.maximum(np.maximum(vals.max(axis=1), at_zero), at_inf)


def _refined_sup(mu, c, s_guess):
    """Local refinement of ``sup_s |sum c e^{-mu s}|`` around a grid maximiser."""
    from scipy import optimize

    def neg(logs):
        return -abs(float(np.dot(c, np.exp(-mu * math.exp(logs)))))

    lo, hi = math.log(s_guess) - 2.0, math.log(s_guess) + 2.0
    dense = np.linspace(lo, hi, 512)
    best = min(dense, key=neg)
    res = optimize.minimize_scalar(neg, bounds=(best - 0.02, best + 0.02), method="bounded")
    return max(-res.fun, -neg(best))


class JtReport(NamedTuple):
    max_ratio: float
    ratios: np.ndarray
    n_skipped: int
    n_refined: int


def jt_bound_check(
    kind: SemigroupKind,
    f: HermiteFunction,
    points,
    times: Sequence[float],
    grid: Sequence[float] | None = None,
    tol: float = 1e-6,
    maximal_over: str = "killed",
) -> JtReport:
    """Ratios ``|R_t f(x) - f(x)| / ((4 sqrt(t)/sqrt(pi)) sup_s |S_s sqrt(I-L) f|(x))``.

    ``kind`` must be a killed variant, ``R_t = e^{-t}P_t`` or ``e^{-t}T_t``.
    ``maximal_over="killed"`` takes the supremum of ``S_s = R_s`` (the sharper
    form); ``"base"`` uses the underlying ``P_s`` or ``T_s``.  Pairs ``(x, t)``
    whose ratio exceeds ``1 + tol`` on the grid are re-examined with a local
    optimiser, since a coarse grid can only underestimate the supremum.
    """
    if not kind.killed:
        raise ValueError("the maximal J_t bound is stated for killed semigroups")
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    pts = points.points if hasattr(points, "points") else as_points(kind.space, points)
    grid = time_grid() if grid is None else np.asarray(grid, dtype=float)
    sup_kind = kind if maximal_over == "killed" else kind.base
    shift = 0 if maximal_over == "killed" else 1
    sup_term = maximal_fractional(sup_kind, f, pts, grid, shift=shift)

    mu, C = mode_matrix(kind, f, pts)
    f_x = C.sum(axis=1)
    rt = C @ np.exp(-np.outer(mu, times))
    lhs = np.abs(rt - f_x[:, None])
    bound = (4.0 / SQRT_PI) * np.sqrt(times)[None, :] * sup_term[:, None]
    ok = np.broadcast_to(sup_term[:, None] > DEGENERATE, lhs.shape)
    ratios = np.full(lhs.shape, np.nan)
    ratios[ok] = lhs[ok] / bound[ok]

    n_refined = 0
    bad_rows = np.unique(np.nonzero(np.nan_to_num(ratios) > 1.0 + tol)[0])
    if bad_rows.size:
        root = apply_frac(FracOperator(sup_kind, shift), f)
        mu_r, C_r = mode_matrix(sup_kind, root, pts[bad_rows])
        for k, row in enumerate(bad_rows):
            vals = np.abs(C_r[k] @ np.exp(-np.outer(mu_r, grid)))
            better = _refined_sup(mu_r, C_r[k], grid[int(np.argmax(vals))])
            if better > sup_term[row]:
                sup_term[row] = better
                ratios[row] = lhs[row] / ((4.0 / SQRT_PI) * np.sqrt(times) * better)
            n_refined += 1
    finite = ratios[ok]
    max_ratio = float(np.max(finite)) if finite.size else 0.0
    return JtReport(max_ratio, ratios, int((~ok[:, 0]).sum()), n_refined)


# ---------------------------------------------------------------------------
# Riesz-type comparisons
# ---------------------------------------------------------------------------

class RieszResult(NamedTuple):
    grad_norm: float
    frac_norm: float
    ratio: float
    spectral_energy: float | None
    dirichlet_energy: float | None
    energy_factor: float | None


def riesz_empirical(kind: SemigroupKind, f: HermiteFunction, p: float,
                    order: int | None = None) -> RieszResult:
    """``||∇f||_p`` against ``||sqrt(I-L) f||_p`` by Gauss-Hermite quadrature.

    For Wiener kinds the gradient is ``|D_H f|_H``.  At ``p = 2`` the exact
    spectral energy ``sum mu(alpha) a_alpha^2`` of ``sqrt(-L)`` is compared
    with the quadrature Dirichlet integral; ``energy_factor`` is their
    quotient (``None`` for constants).
    """
    if not p > 1:
        raise ValueError("Riesz comparisons need p > 1")
    base = kind.base
    cm = base.is_wiener
    space = f.space
    if order is None:
        order = max(f.max_degree + 8, default_order(space.d) if space.d > 1 else 64)
        while order**space.d > space.node_budget:
            order -= 1
    rule = gauss_quadrature(space, order)
    grad = gradient_norm(f, rule.nodes, cameron_martin=cm)
    frac = apply_frac(FracOperator(base, 1), f)(rule.nodes)
    grad_p = float(np.dot(rule.weights, grad**p) ** (1.0 / p))
    frac_p = float(np.dot(rule.weights, np.abs(frac) ** p) ** (1.0 / p))
    ratio = grad_p / frac_p if frac_p > 0 else float("nan")
    spectral = dirichlet = factor = None
    if p == 2:
        spectral = float(np.sum(base.multiplier(f.indices) * f.values**2))
        dirichlet = float(np.dot(rule.weights, grad**2))
        factor = spectral / dirichlet if dirichlet > 0 else None
    return RieszResult(grad_p, frac_p, ratio, spectral, dirichlet, factor)
