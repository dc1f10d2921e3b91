"""Maximal-function weights and empirical Lusin-Lipschitz constants.

For a Sobolev function ``f`` the estimate under test is

    |f(x) - f(y)| <= C dist(x, y) (g(x) + g(y))

with ``g`` a sum of two maximal functions.  Three weights are supported:

* ``DA_PRATO``: ``sup_t P_t|∇f| + sup_t |P_t sqrt(I-L) f|``, Euclidean distance;
* ``WIENER``:   ``sup_t T_t|D_H f|_H + sup_t |T_t sqrt(I-L) f|``, Cameron-Martin
  distance;
* ``RCD``:      ``(sup_t H_t|∇f|^a)^{1/a} + sup_t |H_t sqrt(-Δ) f|`` on the
  standard Gaussian space, where the heat flow ``H_t`` is ``T_t`` and the
  curvature bound is ``K = 1`` (so the distance restriction is vacuous).

Vector-valued ``f`` (a list of components) uses the Hilbert-Schmidt norm of
the Jacobian and the Euclidean norm of the componentwise fractional term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import hermite_e
from numpy.polynomial import polynomial as P
from scipy import special

from .exceptions import NodeBudgetError
from .fractional import FracOperator, apply_frac
from .gauss import GaussianSpace, HermiteFunction, as_points, cm_norm, gauss_quadrature, hermite_features
from .semigroup import SemigroupKind, gradient, mode_matrix, time_grid

SKIP_DIST = 1e-10
SKIP_WEIGHT = 1e-12
BRUTE_FORCE_CAP = 2000
_WEIGHT_CHUNK = 1 << 20
_SPLIT_RANGE = 12.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


class LusinVariant(str, enum.Enum):
    DA_PRATO = "daprato"
    WIENER = "wiener"
    RCD = "rcd"


def _components(f) -> list[HermiteFunction]:
    return [f] if isinstance(f, HermiteFunction) else list(f)


def _kind_for(variant: LusinVariant, space: GaussianSpace) -> SemigroupKind:
    if variant is LusinVariant.DA_PRATO:
        return SemigroupKind.da_prato(space)
    if variant is LusinVariant.RCD and not space.is_standard:
        raise ValueError("the RCD variant is instantiated on the standard Gaussian space only")
    return SemigroupKind.wiener(space)


class _GradientNorm:
    """Vectorised ``|∇f|`` (or ``|D_H f|_H``) with one feature pass per call."""

    def __init__(self, comps: list[HermiteFunction], cameron_martin: bool):
        self.space = comps[0].space
        w = np.sqrt(self.space.lam_array) if cameron_martin else np.ones(self.space.d)
        self.degree = max(max(c.max_degree - 1, 0) for c in comps)
        cols = []
        for comp in comps:
            for wi, part in zip(w, gradient(comp)):
                cols.append(wi * part.resize(self.degree).values)
        self.matrix = np.stack(cols, axis=1)

    def __call__(self, x) -> np.ndarray:
        pts = as_points(self.space, x)
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], _WEIGHT_CHUNK):
            feats = hermite_features(self.space, self.degree, pts[start : start + _WEIGHT_CHUNK])
            out[start : start + _WEIGHT_CHUNK] = np.sqrt(np.sum((feats @ self.matrix) ** 2, axis=1))
        return out


def _monomial_gradients(comps: list[HermiteFunction], cameron_martin: bool) -> list[np.ndarray]:
    """1D gradient components as ascending monomial coefficients in ``x``."""
    lam = comps[0].space.lam[0]
    w = math.sqrt(lam) if cameron_martin else 1.0
    out = []
    for comp in comps:
        part = gradient(comp)[0]
        n = np.arange(part.values.size)
        herm = part.values / np.sqrt(special.factorial(n))
        poly = hermite_e.herme2poly(herm) if herm.size else np.zeros(1)
        out.append(w * poly * lam ** (-0.5 * np.arange(poly.size)))
    return out


def _gaussian_split_average(polys: list[np.ndarray], shift: np.ndarray, scale: float,
                            alpha: float) -> np.ndarray:
    """``E (sum_i p_i(shift + scale Z)^2)^{alpha/2}`` for each entry of ``shift``.

    The integral over ``|z| <= _SPLIT_RANGE`` is cut at the real roots of the
    polynomials, where the integrand has kinks, and each piece gets a
    Gauss-Legendre rule; the neglected Gaussian tail is below 1e-30.
    """
    roots = []
    for p in polys:
        trimmed = np.trim_zeros(p, "b")
        if trimmed.size > 1:
            r = P.polyroots(trimmed)
            roots.extend(r[np.abs(r.imag) < 1e-9].real.tolist())
    n = shift.shape[0]
    cuts = (np.asarray(roots)[None, :] - shift[:, None]) / scale if roots else np.empty((n, 0))
    cuts = np.clip(cuts, -_SPLIT_RANGE, _SPLIT_RANGE)
    edges = np.sort(np.concatenate([np.full((n, 1), -_SPLIT_RANGE), cuts,
                                    np.full((n, 1), _SPLIT_RANGE)], axis=1), axis=1)
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    z = (0.5 * (hi + lo))[:, :, None] + half[:, :, None] * _GL_NODES[None, None, :]
    y = shift[:, None, None] + scale * z
    sq = sum(P.polyval(y, p) ** 2 for p in polys)
    vals = sq ** (0.5 * alpha) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return np.einsum("nik,k,ni->n", vals, _GL_WEIGHTS, half)


def _maximal_gradient_1d(kind: SemigroupKind, comps: list[HermiteFunction], pts: np.ndarray,
                         grid: np.ndarray, alpha: float, cameron_martin: bool) -> np.ndarray:
    polys = _monomial_gradients(comps, cameron_martin)
    x = pts[:, 0]
    best = np.sqrt(sum(P.polyval(x, p) ** 2 for p in polys)) ** alpha
    lam = kind.space.lam[0]
    mean = _gaussian_split_average(polys, np.zeros(1), math.sqrt(lam), alpha)[0]
    best = np.maximum(best, mean)
    for t in grid:
        a, var = kind.mehler_parameters(float(t))
        vals = _gaussian_split_average(polys, a[0] * x, math.sqrt(var[0]), alpha)
        np.maximum(best, vals, out=best)
    return best


def _default_order(d: int) -> int:
    return {1: 48, 2: 16, 3: 8}.get(d, 4)


@dataclass(eq=False)
class LusinWeight:
    variant: LusinVariant
    kind: SemigroupKind
    grid: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    g_max: np.ndarray = field(repr=False)
    g_frac: np.ndarray = field(repr=False)
    alpha: float = 1.0

    @property
    def g(self) -> np.ndarray:
        return self.g_max + self.g_frac

    def distance(self, x, y) -> np.ndarray:
        diff = np.asarray(x) - np.asarray(y)
        if self.variant is LusinVariant.WIENER:
            return np.atleast_1d(cm_norm(self.kind.space, diff))
        return np.linalg.norm(diff, axis=-1)


def maximal_gradient(kind: SemigroupKind, comps: list[HermiteFunction], pts: np.ndarray,
                     grid: np.ndarray, alpha: float = 1.0, cameron_martin: bool = False,
                     order: int | None = None) -> np.ndarray:
    """``(sup_t R_t |∇f|^alpha)^{1/alpha}`` on the grid plus both limits.

    ``t -> 0`` contributes ``|∇f|(x)^alpha`` and ``t -> ∞`` the mean
    ``∫ |∇f|^alpha dm``.
    """
    space = kind.space
    if space.d == 1 and order is None:
        best = _maximal_gradient_1d(kind, comps, pts, grid, alpha, cameron_martin)
        return best if alpha == 1.0 else best ** (1.0 / alpha)
    order = order or _default_order(space.d)
    gn = _GradientNorm(comps, cameron_martin)

    def integrand(y):
        v = gn(y)
        return v if alpha == 1.0 else v**alpha

    best = integrand(pts)
    full = gauss_quadrature(space, max(order, 2 * gn.degree + 2) if space.d == 1 else order)
    best = np.maximum(best, full.integrate(integrand))
    for t in grid:
        a, var = kind.mehler_parameters(float(t))
        noise = gauss_quadrature(GaussianSpace(var), order)
        k = len(noise)
        per_chunk = max(1, _WEIGHT_CHUNK // k)
        for start in range(0, pts.shape[0], per_chunk):
            chunk = pts[start : start + per_chunk]
            arg = (chunk * a)[:, None, :] + noise.nodes[None, :, :]
            vals = integrand(arg.reshape(-1, space.d)).reshape(chunk.shape[0], k) @ noise.weights
            np.maximum(best[start : start + per_chunk], vals, out=best[start : start + per_chunk])
    return best if alpha == 1.0 else best ** (1.0 / alpha)


def maximal_fractional_vector(kind: SemigroupKind, comps: list[HermiteFunction], pts: np.ndarray,
                              grid: np.ndarray, shift: int) -> np.ndarray:
    """``sup_t |R_t sqrt(shift - L) f|(x)`` with ``|.|`` Euclidean over components."""
    times = np.concatenate([[0.0], grid])
    sq = np.zeros((pts.shape[0], times.shape[0]))
    sq_inf = np.zeros(pts.shape[0])
    for comp in comps:
        root = apply_frac(FracOperator(kind, shift), comp)
        mu, C = mode_matrix(kind, root, pts)
        sq += (C @ np.exp(-np.outer(mu, times))) ** 2
        sq_inf += C[:, mu == 0].sum(axis=1) ** 2
    return np.sqrt(np.maximum(sq.max(axis=1), sq_inf))


def build_weight(
    variant: LusinVariant | str,
    f,
    points,
    grid: Sequence[float] | None = None,
    alpha: float = 1.5,
    order: int | None = None,
) -> LusinWeight:
    """Evaluate the Lusin weight ``g`` of ``variant`` at every point.

    ``alpha`` is used by the RCD variant only and must lie in ``(1, 2)``.
    """
    variant = LusinVariant(variant)
    comps = _components(f)
    space = comps[0].space
    pts = points.points if hasattr(points, "points") else as_points(space, points)
    grid = time_grid() if grid is None else np.asarray(grid, dtype=float)
    kind = _kind_for(variant, space)
    if variant is LusinVariant.RCD:
        if not 1.0 < alpha < 2.0:
            raise ValueError("RCD exponent alpha must lie in (1, 2)")
        g_max = maximal_gradient(kind, comps, pts, grid, alpha=alpha, order=order)
        g_frac = maximal_fractional_vector(kind, comps, pts, grid, shift=0)
    else:
        cm = variant is LusinVariant.WIENER
        g_max = maximal_gradient(kind, comps, pts, grid, cameron_martin=cm, order=order)
        g_frac = maximal_fractional_vector(kind, comps, pts, grid, shift=1)
        alpha = 1.0
    return LusinWeight(variant, kind, grid, pts, g_max, g_frac, alpha)


def _values(f, pts: np.ndarray) -> np.ndarray:
    comps = _components(f)
    return np.stack([c(pts) for c in comps], axis=1)


class PairSample(NamedTuple):
    points: np.ndarray
    i: np.ndarray
    j: np.ndarray


def make_pairs(
    cloud,
    n_pairs: int,
    seed: int,
    near_fraction: float = 0.0,
    deltas: Sequence[float] = (1e-3, 1e-2, 1e-1, 1.0),
) -> PairSample:
    """Independent pairs from ``cloud`` plus optional near pairs ``(x, x + delta u)``.

    Near-pair partners are appended to the point array, so a weight built on
    ``PairSample.points`` covers every pair.
    """
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
    n, d = pts.shape
    rng = np.random.Generator(np.random.Philox(seed))
    n_near = int(round(near_fraction * n_pairs))
    n_far = n_pairs - n_near
    i = rng.integers(0, n, n_far)
    j = (i + rng.integers(1, n, n_far)) % n if n > 1 else i.copy()
    if n_near == 0:
        return PairSample(pts, i, j)
    base = rng.integers(0, n, n_near)
    u = rng.standard_normal((n_near, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    delta = np.asarray(deltas, dtype=float)[rng.integers(0, len(deltas), n_near)]
    extra = pts[base] + delta[:, None] * u
    all_pts = np.concatenate([pts, extra])
    return PairSample(all_pts, np.concatenate([i, base]), np.concatenate([j, n + np.arange(n_near)]))


@dataclass
class ProbeReport:
    n_pairs: int
    max_ratio: float
    hist_counts: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)
    n_skipped: int
    constant_estimate: float
    bootstrap_interval: tuple[float, float]


def pair_ratios(variant, f, weight: LusinWeight, i: np.ndarray, j: np.ndarray):
    """Per-pair ratios ``|f(x)-f(y)| / (dist (g(x)+g(y)))`` and a validity mask."""
    variant = LusinVariant(variant)
    if variant is not weight.variant:
        raise ValueError(f"weight was built for {weight.variant.value}, probe asks for {variant.value}")
    vals = _values(f, weight.points)
    g = weight.g
    x, y = weight.points[i], weight.points[j]
    dist = weight.distance(x, y)
    num = np.linalg.norm(vals[i] - vals[j], axis=1)
    den = g[i] + g[j]
    ok = (dist >= SKIP_DIST) & (den >= SKIP_WEIGHT)
    ratios = np.zeros(i.shape[0])
    ratios[ok] = num[ok] / (dist[ok] * den[ok])
    return ratios, ok


def lipschitz_probe(
    variant,
    f,
    weight: LusinWeight,
    pairs: PairSample | tuple[np.ndarray, np.ndarray],
    n_bins: int = 32,
    n_bootstrap: int = 200,
    seed: int = 0,
) -> ProbeReport:
    """Distribution of Lusin-Lipschitz ratios over a set of index pairs."""
    if isinstance(pairs, PairSample):
        i, j = pairs.i, pairs.j
    else:
        i, j = pairs
    i = np.asarray(i)
    j = np.asarray(j)
    ratios, ok = pair_ratios(variant, f, weight, i, j)
    good = ratios[ok]
    if good.size == 0:
        return ProbeReport(0, 0.0, np.zeros(n_bins, int), np.zeros(n_bins + 1), int(i.size), 0.0, (0.0, 0.0))
    max_ratio = float(good.max())
    counts, edges = np.histogram(good, bins=n_bins, range=(0.0, max_ratio if max_ratio > 0 else 1.0))
    rng = np.random.Generator(np.random.Philox(seed))
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        boots[b] = good[rng.integers(0, good.size, good.size)].max()
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return ProbeReport(int(good.size), max_ratio, counts, edges, int((~ok).sum()), max_ratio,
                       (float(lo), float(hi)))


def brute_force_best_constant(variant, f, weight: LusinWeight, cap: int = BRUTE_FORCE_CAP) -> float:
    """Exhaustive maximum of the Lusin-Lipschitz ratio over all point pairs."""
    pts = weight.points
    n, d = pts.shape
    if n > cap:
        raise NodeBudgetError(f"exhaustive search over {n} points exceeds the cap of {cap}")
    if d > 2:
        raise ValueError("exhaustive search is limited to d <= 2")
    best = 0.0
    for start in range(0, n, 256):
        rows = np.arange(start, min(start + 256, n))
        ii = np.repeat(rows, n)
        jj = np.tile(np.arange(n), rows.size)
        keep = jj > ii
        ratios, ok = pair_ratios(variant, f, weight, ii[keep], jj[keep])
        if ok.any():
            best = max(best, float(ratios[ok].max()))
    return best


def empirical_constant(
    variant,
    f,
    cloud,
    n_pairs: int = 20_000,
    seed: int = 0,
    near_fraction: float = 0.25,
    grid: Sequence[float] | None = None,
    order: int | None = None,
) -> ProbeReport:
    """Build a weight on a cloud and probe it: the measured Lusin constant."""
    pairs = make_pairs(cloud, n_pairs, seed, near_fraction)
    weight = build_weight(variant, f, pairs.points, grid=grid, order=order)
    return lipschitz_probe(variant, f, weight, pairs, seed=seed)
