"""Finite-dimensional centred Gaussian spaces.

Covariances are diagonal, ``Q = diag(lam)``. Functions are represented in the
tensor basis of orthonormal probabilists' Hermite polynomials

    h_alpha(x) = prod_i h_{alpha_i}(x_i / sqrt(lam_i)),   h_n = He_n / sqrt(n!),

which is orthonormal in ``L^2(N_Q)``.  Everything here is pure and safe to
call from several threads.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import NodeBudgetError

DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_MAX_DEGREE = 12
_SAMPLE_BLOCK = 8192
_EVAL_CHUNK = 1 << 16


@dataclass(frozen=True)
class GaussianSpace:
    """Centred Gaussian measure on R^d with covariance ``diag(lam)``."""

    lam: tuple[float, ...]
    node_budget: int = DEFAULT_NODE_BUDGET

    def __init__(self, lam: Sequence[float] | float, node_budget: int = DEFAULT_NODE_BUDGET):
        lam_t = tuple(float(v) for v in np.atleast_1d(np.asarray(lam, dtype=float)))
        if not lam_t:
            raise ValueError("a Gaussian space needs at least one dimension")
        if any(not np.isfinite(v) or v <= 0 for v in lam_t):
            raise ValueError(f"covariance eigenvalues must be positive, got {lam_t}")
        if node_budget < 1:
            raise ValueError("node_budget must be positive")
        object.__setattr__(self, "lam", lam_t)
        object.__setattr__(self, "node_budget", int(node_budget))

    @classmethod
    def standard(cls, d: int) -> "GaussianSpace":
        return cls([1.0] * d)

    @property
    def d(self) -> int:
        return len(self.lam)

    @property
    def lambda_max(self) -> float:
        return max(self.lam)

    @property
    def lam_array(self) -> np.ndarray:
        return np.asarray(self.lam, dtype=float)

    @property
    def sqrt_lam(self) -> np.ndarray:
        return np.sqrt(self.lam_array)

    @property
    def is_standard(self) -> bool:
        return all(v == 1.0 for v in self.lam)

    def scaled(self, factors: Sequence[float] | np.ndarray) -> "GaussianSpace":
        """Space with covariance ``diag(lam * factors)``."""
        return GaussianSpace(self.lam_array * np.asarray(factors, dtype=float), self.node_budget)


def as_points(space: GaussianSpace, x) -> np.ndarray:
    """Coerce ``x`` to an ``(n, d)`` float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.shape[0] == space.d else arr.reshape(-1, 1)
    if arr.shape[-1] != space.d:
        raise ValueError(f"points have dimension {arr.shape[-1]}, space has {space.d}")
    return arr


# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------

def hermite_eval(n: int, x):
    """Orthonormal probabilists' Hermite polynomial ``h_n(x) = He_n(x)/sqrt(n!)``.

    Uses the normalised form of ``He_{k+1} = x He_k - k He_{k-1}`` so that
    large degrees do not overflow.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for k in range(n):
        prev, cur = cur, (x * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
    return float(cur) if cur.ndim == 0 else cur


def hermite_table(n_max: int, x) -> np.ndarray:
    """Values ``h_0(x), ..., h_{n_max}(x)`` stacked along the last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = x
    for k in range(1, n_max):
        out[..., k + 1] = (x * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
    return out


@lru_cache(maxsize=64)
def multi_indices(d: int, max_degree: int) -> np.ndarray:
    """All multi-indices with ``|alpha| <= max_degree``, ordered by degree."""
    idx = [
        a
        for a in itertools.product(range(max_degree + 1), repeat=d)
        if sum(a) <= max_degree
    ]
    idx.sort(key=lambda a: (sum(a), tuple(-v for v in a)))
    arr = np.array(idx, dtype=np.int64).reshape(-1, d)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _index_lookup(d: int, max_degree: int) -> dict[tuple[int, ...], int]:
    return {tuple(int(v) for v in a): k for k, a in enumerate(multi_indices(d, max_degree))}


def hermite_features(space: GaussianSpace, max_degree: int, x) -> np.ndarray:
    """Matrix of basis values ``h_alpha(x_k)``, shape ``(n, n_indices)``."""
    pts = as_points(space, x)
    idx = multi_indices(space.d, max_degree)
    z = pts / space.sqrt_lam
    feats = np.ones((pts.shape[0], idx.shape[0]))
    for i in range(space.d):
        table = hermite_table(max_degree, z[:, i])
        feats *= table[:, idx[:, i]]
    return feats


class MultiIndex(tuple):
    """Tuple of nonnegative integers with a cached total degree."""

    def __new__(cls, alpha: Sequence[int]):
        vals = tuple(int(a) for a in alpha)
        if any(a < 0 for a in vals):
            raise ValueError(f"multi-index entries must be nonnegative: {vals}")
        return super().__new__(cls, vals)

    @property
    def degree(self) -> int:
        return sum(self)


@dataclass(frozen=True, eq=False)
class HermiteFunction:
    """Truncated Hermite expansion ``f = sum_alpha a_alpha h_alpha``.

    ``values[k]`` is the coefficient of ``multi_indices(d, max_degree)[k]``.
    """

    space: GaussianSpace
    max_degree: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        expected = multi_indices(self.space.d, self.max_degree).shape[0]
        if vals.shape[0] != expected:
            raise ValueError(f"expected {expected} coefficients, got {vals.shape[0]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_coeffs(
        cls,
        space: GaussianSpace,
        coeffs: Mapping[Sequence[int], float],
        max_degree: int | None = None,
    ) -> "HermiteFunction":
        keys = [MultiIndex(k) for k in coeffs]
        for k in keys:
            if len(k) != space.d:
                raise ValueError(f"multi-index {tuple(k)} does not match dimension {space.d}")
        top = max((k.degree for k in keys), default=0)
        if max_degree is None:
            max_degree = top
        elif top > max_degree:
            raise ValueError(f"coefficient of degree {top} exceeds max_degree {max_degree}")
        lookup = _index_lookup(space.d, max_degree)
        vals = np.zeros(len(lookup))
        for k, v in zip(keys, coeffs.values()):
            vals[lookup[tuple(k)]] += float(v)
        return cls(space, max_degree, vals)

    @classmethod
    def constant(cls, space: GaussianSpace, c: float, max_degree: int = 0) -> "HermiteFunction":
        return cls.from_coeffs(space, {(0,) * space.d: c}, max_degree)

    @classmethod
    def basis(cls, space: GaussianSpace, alpha: Sequence[int], max_degree: int | None = None):
        return cls.from_coeffs(space, {tuple(alpha): 1.0}, max_degree)

    @classmethod
    def linear(cls, space: GaussianSpace, a: Sequence[float], max_degree: int = 1):
        """``f(x) = <a, x>``, written as ``sum_i a_i sqrt(lam_i) h_{e_i}``."""
        a = np.asarray(a, dtype=float)
        coeffs = {}
        for i in range(space.d):
            e = [0] * space.d
            e[i] = 1
            coeffs[tuple(e)] = a[i] * space.sqrt_lam[i]
        return cls.from_coeffs(space, coeffs, max_degree)

    @classmethod
    def random(
        cls,
        space: GaussianSpace,
        max_degree: int,
        rng: np.random.Generator,
        scale: float = 1.0,
    ) -> "HermiteFunction":
        n = multi_indices(space.d, max_degree).shape[0]
        return cls(space, max_degree, scale * rng.standard_normal(n))

    @classmethod
    def project(
        cls,
        space: GaussianSpace,
        func: Callable[[np.ndarray], np.ndarray],
        max_degree: int = DEFAULT_MAX_DEGREE,
        order: int | None = None,
    ) -> "HermiteFunction":
        """L^2 projection of a black-box function onto degree ``<= max_degree``."""
        if order is None:
            order = max(2 * max_degree + 8, 24)
        rule = gauss_quadrature(space, order)
        vals = np.asarray(func(rule.nodes), dtype=float)
        feats = hermite_features(space, max_degree, rule.nodes)
        return cls(space, max_degree, feats.T @ (rule.weights * vals))

    # -- views ------------------------------------------------------------
    @property
    def indices(self) -> np.ndarray:
        return multi_indices(self.space.d, self.max_degree)

    @property
    def coeffs(self) -> dict[MultiIndex, float]:
        """Nonzero coefficients keyed by multi-index."""
        return {
            MultiIndex(a): float(v) for a, v in zip(self.indices, self.values) if v != 0.0
        }

    def coefficient(self, alpha: Sequence[int]) -> float:
        k = _index_lookup(self.space.d, self.max_degree).get(tuple(int(a) for a in alpha))
        return 0.0 if k is None else float(self.values[k])

    def items(self) -> Iterator[tuple[MultiIndex, float]]:
        return iter(self.coeffs.items())

    @property
    def mean(self) -> float:
        return float(self.values[0])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def with_values(self, values: np.ndarray) -> "HermiteFunction":
        return HermiteFunction(self.space, self.max_degree, values)

    def resize(self, max_degree: int) -> "HermiteFunction":
        """Re-embed at another truncation order, dropping higher coefficients."""
        new = np.zeros(multi_indices(self.space.d, max_degree).shape[0])
        lookup = _index_lookup(self.space.d, max_degree)
        for a, v in zip(self.indices, self.values):
            k = lookup.get(tuple(int(c) for c in a))
            if k is not None:
                new[k] = v
        return HermiteFunction(self.space, max_degree, new)

    def discarded_mass(self, max_degree: int) -> float:
        """L^2 norm of the coefficients that ``resize(max_degree)`` would drop."""
        deg = self.indices.sum(axis=1)
        return float(np.sqrt(np.sum(self.values[deg > max_degree] ** 2)))

    # -- evaluation -------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        pts = as_points(self.space, x)
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], _EVAL_CHUNK):
            chunk = pts[start : start + _EVAL_CHUNK]
            out[start : start + _EVAL_CHUNK] = hermite_features(
                self.space, self.max_degree, chunk
            ) @ self.values
        return out

    # -- arithmetic -------------------------------------------------------
    def _aligned(self, other: "HermiteFunction") -> tuple[np.ndarray, np.ndarray, int]:
        if other.space != self.space:
            raise ValueError("HermiteFunctions live on different spaces")
        n = max(self.max_degree, other.max_degree)
        return self.resize(n).values, other.resize(n).values, n

    def __add__(self, other):
        if isinstance(other, HermiteFunction):
            a, b, n = self._aligned(other)
            return HermiteFunction(self.space, n, a + b)
        vals = self.values.copy()
        vals[0] += float(other)
        return self.with_values(vals)

    __radd__ = __add__

    def __neg__(self):
        return self.with_values(-self.values)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, HermiteFunction):
            return NotImplemented
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / float(c))


# ---------------------------------------------------------------------------
# Quadrature and sampling
# ---------------------------------------------------------------------------

class QuadratureRule(NamedTuple):
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, np.asarray(func(self.nodes), dtype=float)))

    def __len__(self) -> int:  # type: ignore[override]
        return self.weights.shape[0]


@lru_cache(maxsize=128)
def _hermite_e_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(m)
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_quadrature(space: GaussianSpace, m: int) -> QuadratureRule:
    """Tensor Gauss-Hermite rule for ``N_Q`` with ``m`` points per axis.

    Exact for polynomials of degree ``< 2m`` in each coordinate; weights sum
    to one.
    """
    if m < 1:
        raise ValueError("need at least one node per axis")
    total = m**space.d
    if total > space.node_budget:
        raise NodeBudgetError(
            f"{m}^{space.d} = {total} nodes exceeds the budget of {space.node_budget}"
        )
    x, w = _hermite_e_rule(m)
    grids = np.meshgrid(*([x] * space.d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1) * space.sqrt_lam
    wgrids = np.meshgrid(*([w] * space.d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return QuadratureRule(nodes, weights)


def polar_quadrature(space: GaussianSpace, n_radial: int = 96, n_angle: int = 512,
                     r_max: float = 12.0) -> QuadratureRule:
    """Polar product rule for ``N_Q`` on R^2.

    Suited to integrands such as ``|b(x)|^p`` that are smooth along rays but
    not at the origin, where tensor Gauss-Hermite rules converge slowly.
    """
    if space.d != 2:
        raise ValueError("polar quadrature is only defined for d = 2")
    r, wr = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * r_max * (r + 1.0)
    wr = 0.5 * r_max * wr * r * np.exp(-0.5 * r * r)
    theta = 2.0 * np.pi * np.arange(n_angle) / n_angle
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    z = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=-1)
    weights = np.repeat(wr, n_angle) / n_angle
    return QuadratureRule(z * space.sqrt_lam, weights / weights.sum())


def expectation(space: GaussianSpace, func: Callable[[np.ndarray], np.ndarray],
                order: int = 48) -> float:
    """``∫ func dN_Q``: polar rule for d = 2, tensor Gauss-Hermite otherwise."""
    if space.d == 2:
        return polar_quadrature(space).integrate(func)
    m = order
    while m**space.d > space.node_budget:
        m -= 1
    return gauss_quadrature(space, m).integrate(func)


@dataclass(frozen=True, eq=False)
class SampleCloud:
    space: GaussianSpace
    n: int
    seed: int
    points: np.ndarray = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)


def _sample_block(seed: int, block: int, count: int, d: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss)).standard_normal((count, d))


def sample(space: GaussianSpace, n: int, seed: int, jobs: int = 1) -> SampleCloud:
    """Draw ``n`` i.i.d. points from ``N_Q``.

    Points are generated in fixed-size blocks, each from its own counter-based
    stream keyed by ``(seed, block)``, so the cloud does not depend on ``jobs``.
    """
    if n < 1:
        raise ValueError("sample size must be positive")
    seed = int(seed) & ((1 << 64) - 1)
    starts = list(range(0, n, _SAMPLE_BLOCK))
    counts = [min(_SAMPLE_BLOCK, n - s) for s in starts]
    args = [(seed, b, c, space.d) for b, c in enumerate(counts)]
    if jobs > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(lambda a: _sample_block(*a), args))
    else:
        blocks = [_sample_block(*a) for a in args]
    pts = np.concatenate(blocks, axis=0) * space.sqrt_lam
    pts.setflags(write=False)
    return SampleCloud(space, n, seed, pts)


# ---------------------------------------------------------------------------
# Cameron-Martin geometry
# ---------------------------------------------------------------------------

def cm_norm(space: GaussianSpace, v) -> np.ndarray | float:
    """Cameron-Martin norm ``|Q^{-1/2} v|`` (vectorised over leading axes)."""
    v = np.asarray(v, dtype=float)
    out = np.sqrt(np.sum(v * v / space.lam_array, axis=-1))
    return float(out) if out.ndim == 0 else out


def cameron_martin_density(space: GaussianSpace, v, x) -> np.ndarray | float:
    """Density of ``N_{v,Q}`` with respect to ``N_Q`` evaluated at ``x``."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    expo = -0.5 * float(np.sum(v * v / space.lam_array)) + np.sum(
        x * (v / space.lam_array), axis=-1
    )
    out = np.exp(expo)
    return float(out) if out.ndim == 0 else out


def white_noise(space: GaussianSpace, h, x) -> np.ndarray:
    """Finite-dimensional white noise ``W_h(x) = <Q^{-1/2} h, x>``."""
    return np.asarray(x, dtype=float) @ (np.asarray(h, dtype=float) / space.sqrt_lam)


def white_noise_exp_integral(space: GaussianSpace, h, order: int = 64) -> float:
    """``∫ exp(W_h) dN_Q`` by Gauss-Hermite quadrature.

    Each coordinate factorises, so the product of one-dimensional rules is
    used; this keeps high orders affordable in any dimension.
    """
    h = np.asarray(h, dtype=float)
    x, w = _hermite_e_rule(order)
    total = 1.0
    for i in range(space.d):
        # W_h restricted to coordinate i is (h_i / sqrt(lam_i)) * sqrt(lam_i) * z
        total *= float(np.dot(w, np.exp(h[i] * x)))
    return total


def white_noise_closed_forms(h) -> dict[str, float]:
    """The two candidate closed forms for ``∫ exp(W_h) dm``."""
    nh = float(np.linalg.norm(np.asarray(h, dtype=float)))
    return {"exp_half_norm": math.exp(0.5 * nh), "exp_half_norm_sq": math.exp(0.5 * nh * nh)}
