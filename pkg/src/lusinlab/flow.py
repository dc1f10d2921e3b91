"""Lagrangian flows of Sobolev vector fields on Gaussian spaces.

Trajectories are integrated on a cloud of starting points together with the
log-Jacobian ``∫_0^t div b(s, X_s) ds``, which gives the density of the
pushed-forward measure along each trajectory:

    u_t(X_t(x)) = rho(x) / (rho(X_t(x)) exp(∫_0^t div b(s, X_s(x)) ds)),

``rho`` being the Gaussian density.  The stability check compares two flows
through the functional ``Phi(t) = ∫ log(|X_t - Xbar_t| / delta + 1) dm`` and the
bound ``∫ |X_t - Xbar_t| ∧ 1 dm <= C / |log delta|``.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .exceptions import FlowBlowUpError, HypothesisViolation
from .gauss import GaussianSpace, HermiteFunction, as_points, cm_norm, expectation
from .lusin import LusinVariant, build_weight, lipschitz_probe, make_pairs
from .semigroup import gradient

log = logging.getLogger(__name__)

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


class FieldFamily(str, enum.Enum):
    ROTATION = "rotation"
    PERTURBED_ROTATION = "perturbed_rotation"
    SHEAR = "shear"
    CUSTOM_HERMITE = "custom_hermite"


@dataclass(frozen=True, eq=False)
class FlowFieldSpec:
    """A time-dependent vector field ``b(t, x)`` on ``[0, T] x R^d``.

    Linear families are stored through their matrix ``M`` (``b = M x + c``).
    ``rotation`` uses ``M = omega Q^{1/2} J Q^{-1/2}`` on the first two axes,
    which preserves ``N_Q`` for any diagonal covariance.
    """

    family: FieldFamily
    space: GaussianSpace
    horizon: float = 1.0
    matrix: np.ndarray | None = field(default=None, repr=False)
    offset: np.ndarray | None = field(default=None, repr=False)
    components: tuple[HermiteFunction, ...] = field(default=(), repr=False)
    modulation: Callable[[float], float] | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    # -- constructors -----------------------------------------------------
    @staticmethod
    def _rotation_matrix(space: GaussianSpace, omega: float) -> np.ndarray:
        if space.d < 2:
            raise ValueError("rotation fields need d >= 2")
        M = np.zeros((space.d, space.d))
        s = space.sqrt_lam[:2]
        M[:2, :2] = omega * (s[:, None] * _J / s[None, :])
        return M

    @classmethod
    def rotation(cls, space: GaussianSpace, omega: float = 1.0, horizon: float = 1.0):
        return cls(FieldFamily.ROTATION, space, horizon, cls._rotation_matrix(space, omega),
                   params={"omega": omega})

    @classmethod
    def perturbed_rotation(cls, space: GaussianSpace, omega: float = 1.0, epsilon: float = 0.0,
                           pattern: str = "speed", direction: Sequence[float] | None = None,
                           horizon: float = 1.0):
        """Rotation perturbed either in speed, ``omega (1 + epsilon)``, or by a
        constant drift ``epsilon * direction`` (``pattern="shift"``)."""
        if pattern == "speed":
            M = cls._rotation_matrix(space, omega * (1.0 + epsilon))
            offset = None
        elif pattern == "shift":
            M = cls._rotation_matrix(space, omega)
            c = np.zeros(space.d)
            c[0] = 1.0
            if direction is not None:
                c = np.asarray(direction, dtype=float)
            offset = epsilon * c
        else:
            raise ValueError(f"unknown perturbation pattern {pattern!r}")
        return cls(FieldFamily.PERTURBED_ROTATION, space, horizon, M, offset,
                   params={"omega": omega, "epsilon": epsilon, "pattern": pattern})

    @classmethod
    def shear(cls, space: GaussianSpace, a: float, horizon: float = 1.0):
        if space.d < 2:
            raise ValueError("shear fields need d >= 2")
        M = np.zeros((space.d, space.d))
        M[0, 1] = a
        return cls(FieldFamily.SHEAR, space, horizon, M, params={"a": a})

    @classmethod
    def custom_hermite(cls, components: Sequence[HermiteFunction], horizon: float = 1.0,
                       modulation: Callable[[float], float] | None = None):
        comps = tuple(components)
        space = comps[0].space
        if len(comps) != space.d:
            raise ValueError("need one component per dimension")
        return cls(FieldFamily.CUSTOM_HERMITE, space, horizon, components=comps,
                   modulation=modulation)

    # -- analytic flags ---------------------------------------------------
    @property
    def is_linear(self) -> bool:
        return self.matrix is not None

    @property
    def measure_preserving(self) -> bool:
        if self.family is FieldFamily.ROTATION:
            return True
        if self.family is FieldFamily.PERTURBED_ROTATION:
            return self.offset is None or not np.any(self.offset)
        if self.family is FieldFamily.SHEAR:
            return self.params["a"] == 0
        return False

    @property
    def closed_form_flow(self) -> bool:
        if not self.is_linear:
            return False
        return self.offset is None or self.space.d == 2

    def _scale(self, t: float) -> float:
        return 1.0 if self.modulation is None else float(self.modulation(t))

    # -- evaluation -------------------------------------------------------
    def velocity(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.is_linear:
            v = x @ self.matrix.T
            return v + self.offset if self.offset is not None else v
        return self._scale(t) * np.stack([c(x) for c in self.components], axis=1)

    def jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """``J[k, i, j] = d b_i / d x_j`` at each point."""
        x = as_points(self.space, x)
        if self.is_linear:
            return np.broadcast_to(self.matrix, (x.shape[0], self.space.d, self.space.d))
        rows = [np.stack([g(x) for g in gradient(c)], axis=1) for c in self.components]
        return self._scale(t) * np.stack(rows, axis=1)

    def divergence(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.is_linear:
            return np.full(x.shape[0], float(np.trace(self.matrix)))
        return self._scale(t) * sum(
            gradient(c)[i](x) for i, c in enumerate(self.components)
        )

    def exact_flow(self, t: float, x) -> np.ndarray:
        if not self.closed_form_flow:
            raise ValueError(f"{self.family.value} field has no closed-form flow")
        x = as_points(self.space, x)
        E = linalg.expm(t * self.matrix)
        out = x @ E.T
        if self.offset is not None and np.any(self.offset):
            # 2x2 rotation generators are invertible
            drift = np.linalg.solve(self.matrix, (E - np.eye(self.space.d)) @ self.offset)
            out = out + drift
        return out

    def lusin_components(self, cameron_martin: bool = False) -> list[HermiteFunction]:
        """Components of ``b`` (or of ``Q^{-1/2} b``) as Hermite expansions at unit modulation."""
        space = self.space
        if self.is_linear:
            rows = self.matrix / space.sqrt_lam[:, None] if cameron_martin else self.matrix
            comps = [HermiteFunction.linear(space, row) for row in rows]
            if self.offset is not None:
                off = self.offset / space.sqrt_lam if cameron_martin else self.offset
                comps = [c + float(o) for c, o in zip(comps, off)]
            return comps
        if cameron_martin:
            return [c / math.sqrt(l) for c, l in zip(self.components, space.lam)]
        return list(self.components)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _vector_norm(space: GaussianSpace, v: np.ndarray, cameron_martin: bool) -> np.ndarray:
    return cm_norm(space, v) if cameron_martin else np.linalg.norm(v, axis=-1)


def _jacobian_norm(space: GaussianSpace, J: np.ndarray, cameron_martin: bool) -> np.ndarray:
    if cameron_martin:
        lam = space.lam_array
        w = lam[None, :] / lam[:, None]
        return np.sqrt(np.einsum("kij,ij->k", J**2, w))
    return np.sqrt(np.sum(J**2, axis=(1, 2)))


def _time_rule(horizon: float, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * horizon * (x + 1.0), 0.5 * horizon * w


def sobolev_norms(spec: FlowFieldSpec, p: float, t: float = 0.0,
                  norm_mode: str = "ambient") -> tuple[float, float]:
    """``(||b_t||_{L^p}, ||∇b_t||_{L^p})`` with the Hilbert-Schmidt Jacobian norm."""
    cm = norm_mode == "cameron_martin"
    space = spec.space
    if math.isinf(p):
        raise ValueError("sup norms of unbounded fields are not supported")
    lp = expectation(space, lambda x: _vector_norm(space, spec.velocity(t, x), cm) ** p) ** (1 / p)
    jp = expectation(space, lambda x: _jacobian_norm(space, spec.jacobian(t, x), cm) ** p) ** (1 / p)
    return float(lp), float(jp)


def w1p_time_norm(spec: FlowFieldSpec, p: float, norm_mode: str = "ambient") -> float:
    """``∫_0^T ||b_t||_{W^{1,p}} dt``."""
    if spec.modulation is None:
        return spec.horizon * sum(sobolev_norms(spec, p, 0.0, norm_mode))
    ts, ws = _time_rule(spec.horizon)
    return float(sum(w * sum(sobolev_norms(spec, p, t, norm_mode)) for t, w in zip(ts, ws)))


def field_distance(spec_b: FlowFieldSpec, spec_bbar: FlowFieldSpec, mode: str = "L1",
                   p: float = 1.0, norm_mode: str = "ambient") -> float:
    """``∫_0^T (∫ |b_t - bbar_t|^p dm)^{1/p} dt`` (``mode="L1"`` forces ``p = 1``)."""
    if spec_b.space != spec_bbar.space or spec_b.horizon != spec_bbar.horizon:
        raise ValueError("fields must share space and horizon")
    if mode == "L1":
        p = 1.0
    elif mode != "Lp":
        raise ValueError(f"unknown distance mode {mode!r}")
    cm = norm_mode == "cameron_martin"
    space = spec_b.space

    def at(t):
        def integrand(x):
            diff = spec_b.velocity(t, x) - spec_bbar.velocity(t, x)
            return _vector_norm(space, diff, cm) ** p
        return expectation(space, integrand) ** (1.0 / p)

    autonomous = spec_b.modulation is None and spec_bbar.modulation is None
    if autonomous:
        return float(spec_b.horizon * at(0.0))
    ts, ws = _time_rule(spec_b.horizon)
    return float(sum(w * at(t) for t, w in zip(ts, ws)))


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class FlowEnsemble:
    spec: FlowFieldSpec
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    log_jacobian: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    dt: float
    scheme: str

    @property
    def start(self) -> np.ndarray:
        return self.states[0]


def _rhs(spec: FlowFieldSpec, t: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return spec.velocity(t, x), spec.divergence(t, x)


def integrate_flow(
    spec: FlowFieldSpec,
    cloud,
    dt: float | None = None,
    scheme: str = "rk4",
    n_saved: int = 65,
    bound: float = 1e8,
    weights: np.ndarray | None = None,
) -> FlowEnsemble:
    """Integrate ``X' = b(t, X)`` and the log-Jacobian from every cloud point.

    ``dt`` defaults to ``T / 1024`` and must divide ``T``.  States are stored
    on ``n_saved`` equally spaced times (the step count must be a multiple of
    ``n_saved - 1``; otherwise every step is stored).
    """
    x0 = cloud.points if hasattr(cloud, "points") else as_points(spec.space, cloud)
    if weights is None:
        weights = np.full(x0.shape[0], 1.0 / x0.shape[0])
    T = spec.horizon
    dt = T / 1024 if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("time step must be positive")
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T / dt = {T / dt} is not an integer")
    dt = T / n_steps
    stride = n_steps // (n_saved - 1) if n_saved > 1 and n_steps % (n_saved - 1) == 0 else 1
    n_out = n_steps // stride + 1
    states = np.empty((n_out,) + x0.shape)
    logj = np.empty((n_out, x0.shape[0]))
    x = np.array(x0, dtype=float)
    ell = np.zeros(x0.shape[0])
    states[0], logj[0] = x, ell
    for k in range(n_steps):
        t = k * dt
        if scheme == "rk4":
            k1, l1 = _rhs(spec, t, x)
            k2, l2 = _rhs(spec, t + 0.5 * dt, x + 0.5 * dt * k1)
            k3, l3 = _rhs(spec, t + 0.5 * dt, x + 0.5 * dt * k2)
            k4, l4 = _rhs(spec, t + dt, x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            ell = ell + (dt / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        elif scheme == "euler":
            k1, l1 = _rhs(spec, t, x)
            x = x + dt * k1
            ell = ell + dt * l1
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound:
            worst = int(np.argmax(np.nan_to_num(np.abs(x), nan=np.inf).max(axis=1)))
            raise FlowBlowUpError(
                f"trajectory {worst} left the ball of radius {bound:g} at t = {t + dt:.6g}"
            )
        if (k + 1) % stride == 0:
            states[(k + 1) // stride] = x
            logj[(k + 1) // stride] = ell
    times = np.linspace(0.0, T, n_out)
    return FlowEnsemble(spec, times, states, logj, np.asarray(weights, dtype=float), dt, scheme)


def log_density_along(ens: FlowEnsemble) -> np.ndarray:
    """``log u_t(X_t(x))`` for every saved time and trajectory."""
    lam = ens.spec.space.lam_array
    q0 = np.sum(ens.states[0] ** 2 / lam, axis=-1)
    qt = np.sum(ens.states**2 / lam, axis=-1)
    return -0.5 * q0[None, :] + 0.5 * qt - ens.log_jacobian


@dataclass
class CompressibilityResult:
    L: float
    per_time: np.ndarray = field(repr=False)
    r: float
    at_boundary: bool


def compressibility_estimate(spec: FlowFieldSpec, ens: FlowEnsemble, r: float = math.inf,
                             boundary_quantile: float = 0.99) -> CompressibilityResult:
    """Estimate the compressibility constant from the ensemble.

    ``r = inf`` gives the sup over times and trajectories of ``u_t(X_t(x))``
    (an ess-sup estimate); finite ``r`` gives ``sup_t ||u_t||_{L^r}`` using
    ``∫ u_t^r dm = ∫ u_t(X_t(x))^{r-1} dm(x)``.
    """
    logu = log_density_along(ens)
    if math.isinf(r):
        per_time = np.exp(logu.max(axis=1))
        k, idx = np.unravel_index(int(np.argmax(logu)), logu.shape)
        radius = cm_norm(spec.space, ens.start)
        at_boundary = bool(radius[idx] >= np.quantile(radius, boundary_quantile)) and per_time.max() > 1 + 1e-6
        if at_boundary:
            warnings.warn(
                "compressibility maximum attained at the edge of the cloud; "
                "the ess-sup is under-resolved (possibly infinite)",
                RuntimeWarning,
                stacklevel=2,
            )
    else:
        if r <= 1:
            raise ValueError("L^r compressibility needs r > 1")
        per_time = (np.exp((r - 1.0) * logu) @ ens.weights) ** (1.0 / r)
        at_boundary = False
    L = float(per_time.max())
    if spec.measure_preserving and abs(L - 1.0) > 1e-6:
        warnings.warn(f"measure-preserving field gave L = {L:.9f}", RuntimeWarning, stacklevel=2)
    return CompressibilityResult(L, per_time, r, at_boundary)


def separation(ens: FlowEnsemble, ens_bar: FlowEnsemble, norm_mode: str = "ambient") -> np.ndarray:
    if ens.states.shape != ens_bar.states.shape or not np.array_equal(ens.start, ens_bar.start):
        raise ValueError("ensembles must share the cloud and the time grid")
    diff = ens.states - ens_bar.states
    return _vector_norm(ens.spec.space, diff, norm_mode == "cameron_martin")


def phi_functional(ens: FlowEnsemble, ens_bar: FlowEnsemble, delta: float,
                   norm_mode: str = "ambient") -> np.ndarray:
    """``Phi(t) = ∫ log(|X_t - Xbar_t| / delta + 1) dm`` on the saved grid."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return np.log1p(separation(ens, ens_bar, norm_mode) / delta) @ ens.weights


# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------

@dataclass
class LusinConstant:
    raw: float
    weight_ratio: float
    inflated: float
    variant: str
    provenance: str


def flow_lusin_constant(spec: FlowFieldSpec, p: float, norm_mode: str = "ambient",
                        n_points: int = 400, n_pairs: int = 20_000, seed: int = 0,
                        safety: float = 2.0) -> LusinConstant:
    """Measured constant for the first term of the ``Phi'`` estimate.

    The vector Lusin probe on the components of ``b`` gives ``C_lusin``; the
    step ``∫ g dm <= c ||b||_{W^{1,p}}`` is measured as
    ``c = ||g||_{L^p} / ||b||_{W^{1,p}}`` on the same cloud.  The product is
    inflated by ``safety``.
    """
    from .gauss import sample

    cm = norm_mode == "cameron_martin"
    variant = LusinVariant.WIENER if cm else LusinVariant.DA_PRATO
    comps = spec.lusin_components(cameron_martin=cm)
    cloud = sample(spec.space, n_points, seed)
    pairs = make_pairs(cloud, n_pairs, seed, near_fraction=0.25)
    weight = build_weight(variant, comps, pairs.points)
    report = lipschitz_probe(variant, comps, weight, pairs, seed=seed)
    g_cloud = weight.g[: cloud.n]
    g_p = float(np.mean(g_cloud**p) ** (1.0 / p)) if not math.isinf(p) else float(g_cloud.max())
    unit = spec if spec.modulation is None else FlowFieldSpec(
        spec.family, spec.space, spec.horizon, spec.matrix, spec.offset, spec.components, None, spec.params)
    w1p = sum(sobolev_norms(unit, p if not math.isinf(p) else 2.0, 0.0, norm_mode))
    ratio = g_p / w1p if w1p > 0 else 0.0
    raw = report.max_ratio
    return LusinConstant(raw, ratio, safety * raw * max(ratio, 1.0), variant.value,
                         f"{variant.value} probe, {cloud.n} points, {report.n_pairs} pairs, seed {seed}")


@dataclass
class ChebyshevCheck:
    s: float
    mass_bad: np.ndarray = field(repr=False)
    mass_bound: float
    max_good_ratio: np.ndarray = field(repr=False)
    split_bound: float
    passed: bool


@dataclass
class StabilityReport:
    delta: float
    times: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    lhs: np.ndarray = field(repr=False)
    rhs: float
    C1: float
    C: float
    C_stated: float
    L: float
    L_bar: float
    cp: LusinConstant
    b_norm: float
    norm_mode: str
    r: float
    chebyshev: ChebyshevCheck
    phi_ok: bool
    bound_ok: bool

    @property
    def passed(self) -> bool:
        return self.phi_ok and self.bound_ok and self.chebyshev.passed


def _chebyshev(dist: np.ndarray, weights: np.ndarray, delta: float, C1: float,
               lhs: np.ndarray) -> ChebyshevCheck:
    s = -math.log(delta) / 2.0
    level = np.log1p(dist / delta)
    bad = level > s
    mass_bad = bad.astype(float) @ weights
    good_ratio = np.where(bad, 0.0, dist / (math.exp(s) * delta)).max(axis=1)
    split = C1 / s + math.exp(s) * delta
    ok = bool(np.all(mass_bad <= C1 / s) and np.all(good_ratio <= 1.0) and np.all(lhs <= split))
    return ChebyshevCheck(s, mass_bad, C1 / s, good_ratio, split, ok)


def _stability(spec_b, spec_bbar, p, cloud, dt, norm_mode, r, delta_mode, cp, rel_tol):
    if r == math.inf:
        delta = field_distance(spec_b, spec_bbar, "L1", norm_mode=norm_mode)
    else:
        delta = field_distance(spec_b, spec_bbar, delta_mode, p=p, norm_mode=norm_mode)
    if not delta < 1.0:
        raise HypothesisViolation(f"field distance {delta:.6g} is not below 1")
    ens = integrate_flow(spec_b, cloud, dt)
    ens_bar = integrate_flow(spec_bbar, cloud, dt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        L = compressibility_estimate(spec_b, ens, r).L
        L_bar = compressibility_estimate(spec_bbar, ens_bar, r).L
    if cp is None:
        cp = flow_lusin_constant(spec_b, p, norm_mode)
    b_norm = w1p_time_norm(spec_b, p, norm_mode)
    C1 = cp.inflated * (L + L_bar) * b_norm + L_bar
    C = 2.0 * C1 + 1.0
    C_stated = cp.inflated * (L + L_bar) * b_norm + 2.0 * L + 1.0
    dist = separation(ens, ens_bar, norm_mode)
    lhs = np.minimum(dist, 1.0) @ ens.weights
    phi = np.log1p(dist / delta) @ ens.weights if delta > 0 else np.zeros_like(lhs)
    if delta > 0:
        rhs = C / abs(math.log(delta))
        cheb = _chebyshev(dist, ens.weights, delta, C1, lhs)
    else:
        rhs = 0.0
        cheb = ChebyshevCheck(math.inf, np.zeros_like(lhs), 0.0, np.zeros_like(lhs), 0.0,
                              bool(np.all(lhs == 0)))
    slack = 1.0 + rel_tol
    bound_ok = bool(np.all(lhs <= rhs * slack)) if delta > 0 else bool(np.all(lhs == 0))
    phi_ok = bool(np.all(phi <= C1 * slack))
    log.debug("stability delta=%.3g C1=%.3g C=%.3g max lhs=%.3g", delta, C1, C, lhs.max())
    return StabilityReport(delta, ens.times, phi, lhs, rhs, C1, C, C_stated, L, L_bar, cp,
                           b_norm, norm_mode, r, cheb, phi_ok, bound_ok)


def stability_check(
    spec_b: FlowFieldSpec,
    spec_bbar: FlowFieldSpec,
    p: float,
    cloud,
    dt: float | None = None,
    norm_mode: str = "ambient",
    cp: LusinConstant | None = None,
    rel_tol: float = 0.0,
) -> StabilityReport:
    """Quantitative stability of two flows with ``delta = ||b - bbar||_{L^1} < 1``.

    Constants: ``C1 = C_p (L + Lbar) ||b||_{L^1(W^{1,p})} + Lbar`` and
    ``C = 2 C1 + 1``; ``C_stated`` is the variant
    ``C_p (L + Lbar) ||b|| + 2L + 1``.  ``norm_mode="cameron_martin"``
    measures every distance and norm in ``|.|_H``.
    """
    return _stability(spec_b, spec_bbar, p, cloud, dt, norm_mode, math.inf, "L1", cp, rel_tol)


def lr_stability_check(
    spec_b: FlowFieldSpec,
    spec_bbar: FlowFieldSpec,
    r: float,
    p: float,
    cloud,
    dt: float | None = None,
    cp: LusinConstant | None = None,
    rel_tol: float = 0.0,
) -> StabilityReport:
    """Stability for L^r-regular flows: ``L = sup_t ||u_t||_{L^r}`` and
    ``delta = ||b - bbar||_{L^1(L^p)}`` with ``p >= r / (r - 1)``."""
    if not r > 1:
        raise ValueError("r must exceed one")
    if p < r / (r - 1.0) - 1e-12:
        raise ValueError(f"need p >= r' = {r / (r - 1.0):g}, got p = {p:g}")
    return _stability(spec_b, spec_bbar, p, cloud, dt, "ambient", r, "Lp", cp, rel_tol)
