"""Independent reference values used by the tests.

Nothing here imports lusinlab: each oracle is a closed form, a direct
formula or a brute-force computation written from scratch.
"""

import math

import numpy as np
from scipy import integrate, special


def hermite3(x):
    return (x**3 - 3 * x) / math.sqrt(6.0)


def golub_welsch(m):
    """Probabilists' Gauss-Hermite rule from the Jacobi matrix, weights summing to one."""
    off = np.sqrt(np.arange(1, m))
    J = np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(J)
    return nodes, vecs[0] ** 2


def gaussian_moment(k, var):
    """E[X^k] for X ~ N(0, var)."""
    if k % 2:
        return 0.0
    return var ** (k // 2) * float(special.factorial2(k - 1, exact=True)) if k else 1.0


def ou_square(x, t):
    """T_t applied to x^2 on the standard line."""
    return math.exp(-2 * t) * x * x + (1 - math.exp(-2 * t))


def kernel_direct(s, t):
    a = (s - t) ** -0.5 if s > t else 0.0
    b = s**-0.5 if s > 0 else 0.0
    return (a - b) / math.sqrt(math.pi)


def abs_normal_mean(m, s):
    """E|m + s Z| for standard normal Z."""
    if s == 0:
        return abs(m)
    return s * math.sqrt(2 / math.pi) * math.exp(-m * m / (2 * s * s)) + m * (1 - 2 * special.ndtr(-m / s))


def sup_ou_gradient_square(x, n=512):
    """Fine-grid sup over t of T_t|f'|(x) for f(x) = x^2 on the standard line."""
    ts = np.concatenate([[0.0], np.geomspace(1e-6, 60.0, n)])
    vals = [2 * abs_normal_mean(math.exp(-t) * x, math.sqrt(-math.expm1(-2 * t))) for t in ts]
    return max(vals)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def mean_abs_2d_standard():
    return math.sqrt(math.pi / 2)


def phi_rotation(t, eps, delta, omega=1.0):
    """Phi(t) for rotations at speeds omega and omega(1+eps) on the standard plane."""
    amp = 2 * abs(math.sin(0.5 * omega * eps * t))
    val, _ = integrate.quad(lambda r: math.log1p(amp * r / delta) * r * math.exp(-0.5 * r * r), 0, np.inf)
    return val


def lhs_rotation(t, eps, omega=1.0):
    """∫ |X_t - Xbar_t| ∧ 1 dm for the same pair."""
    amp = 2 * abs(math.sin(0.5 * omega * eps * t))
    val, _ = integrate.quad(lambda r: min(amp * r, 1.0) * r * math.exp(-0.5 * r * r), 0, np.inf, limit=200)
    return val


def shear_lr_norm(a, t, r):
    """||u_t||_{L^r(m)} for the shear x -> (x1 + a t x2, x2) on the standard plane."""
    S = np.array([[1.0, a * t], [0.0, 1.0]])
    sigma = S @ S.T
    M = r * np.linalg.inv(sigma) - (r - 1) * np.eye(2)
    return np.linalg.det(M) ** (-1.0 / (2 * r))


def pushforward_histogram(mapped, bins=80, extent=4.0):
    """Histogram density of mapped standard-normal samples relative to N(0, I_2).

    Returns ``(centers_x, centers_y, ratio, mass)`` where ``ratio`` is the
    empirical push-forward probability of each cell divided by its Gaussian
    probability and ``mass`` the Gaussian probability of the cell.
    """
    edges = np.linspace(-extent, extent, bins + 1)
    counts, _, _ = np.histogram2d(mapped[:, 0], mapped[:, 1], bins=[edges, edges])
    p1 = np.diff(special.ndtr(edges))
    mass = np.outer(p1, p1)
    ratio = counts / mapped.shape[0] / mass
    centers = 0.5 * (edges[1:] + edges[:-1])
    return centers, centers, ratio, mass


def histogram_lr_norm(mapped, r, bins=80, extent=4.0):
    """||u||_{L^r} estimated from the push-forward histogram on a bounded window."""
    _, _, ratio, mass = pushforward_histogram(mapped, bins, extent)
    return float(np.sum(mass * ratio**r) ** (1.0 / r))
