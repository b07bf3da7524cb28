"""
Cartesian multipole expansion of the Coulomb interaction between two
compactly supported charge distributions.

For densities rho_a centered at 0 and rho_b centered at D with Cartesian
moments M_alpha = integral of rho(x) x^alpha,

    E(D) = sum_{alpha, beta} (-1)^|alpha| M^a_alpha M^b_beta d^{alpha+beta}(1/|D|) / (alpha! beta!)

The derivatives of 1/r come from the Hermite recursion

    R^(n)_{t+1,u,v} = t R^(n+1)_{t-1,u,v} + X R^(n+1)_{t,u,v}

seeded with R^(n)_{000} = (-1)^n (2n-1)!! / r^(2n+1).
"""

import functools
import logging
import math
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import special

logger = logging.getLogger("ldlab")

MultiIndex = Tuple[int, int, int]

DEFAULT_ORDER = 6


@functools.lru_cache(maxsize=None)
def multi_indices(order: int) -> Tuple[MultiIndex, ...]:
    """All (a, b, c) with a + b + c <= order, by total degree."""
    indices = []
    for degree in range(order + 1):
        for a in range(degree, -1, -1):
            for b in range(degree - a, -1, -1):
                indices.append((a, b, degree - a - b))
    return tuple(indices)


@functools.lru_cache(maxsize=None)
def _index_table(order: int) -> Dict[MultiIndex, int]:
    return {index: position for position, index in enumerate(multi_indices(order))}


def coulomb_derivatives(displacements: np.ndarray, order: int) -> np.ndarray:
    """
    Partial derivatives d^gamma (1/|D|) for all |gamma| <= order.

    Args:
        displacements: (m, 3) array of nonzero vectors D.
        order: Highest total derivative order.

    Returns:
        (m, len(multi_indices(order))) array.
    """
    D = np.atleast_2d(np.asarray(displacements, dtype=float))
    X, Y, Z = D[:, 0], D[:, 1], D[:, 2]
    r2 = X**2 + Y**2 + Z**2
    inv_r = 1.0 / np.sqrt(r2)
    seed = [inv_r]
    for n in range(1, order + 1):
        seed.append(seed[-1] * (-(2 * n - 1)) / r2)
    cache: Dict[Tuple[int, int, int, int], np.ndarray] = {}

    def R(n: int, t: int, u: int, v: int) -> np.ndarray:
        if t < 0 or u < 0 or v < 0:
            return 0.0
        key = (n, t, u, v)
        if key in cache:
            return cache[key]
        if t > 0:
            value = (t - 1) * R(n + 1, t - 2, u, v) + X * R(n + 1, t - 1, u, v)
        elif u > 0:
            value = (u - 1) * R(n + 1, t, u - 2, v) + Y * R(n + 1, t, u - 1, v)
        elif v > 0:
            value = (v - 1) * R(n + 1, t, u, v - 2) + Z * R(n + 1, t, u, v - 1)
        else:
            value = seed[n]
        cache[key] = value
        return value

    indices = multi_indices(order)
    result = np.empty((len(D), len(indices)))
    for position, (t, u, v) in enumerate(indices):
        result[:, position] = R(0, t, u, v)
    return result


def point_moments(points: np.ndarray, weights: np.ndarray, order: int,
                  center: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Cartesian moments sum_i w_i (x_i - center)^alpha for |alpha| <= order."""
    x = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    powers = [np.stack([x[:, axis] ** p for p in range(order + 1)]) for axis in range(3)]
    return np.array([float(weights @ (powers[0][a] * powers[1][b] * powers[2][c]))
                     for a, b, c in multi_indices(order)])


def ball_moments(radius: float, order: int) -> np.ndarray:
    """Cartesian moments of the unit-density ball of the given radius about its center."""
    result = []
    for a, b, c in multi_indices(order):
        if a % 2 or b % 2 or c % 2:
            result.append(0.0)
            continue
        s = a + b + c
        sphere = 2.0 * math.exp(special.gammaln((a + 1) / 2) + special.gammaln((b + 1) / 2)
                                + special.gammaln((c + 1) / 2) - special.gammaln((s + 3) / 2))
        result.append(sphere * radius ** (s + 3) / (s + 3))
    return np.array(result)


def cuboid_moments(sides: Sequence[float], order: int) -> np.ndarray:
    """Cartesian moments of the unit-density cuboid centered at the origin."""

    def axis_moment(l: float, p: int) -> float:
        return 0.0 if p % 2 else l ** (p + 1) / ((p + 1) * 2.0**p)

    return np.array([axis_moment(sides[0], a) * axis_moment(sides[1], b) * axis_moment(sides[2], c)
                     for a, b, c in multi_indices(order)])


def shifted_moments(moments: np.ndarray, shift: Sequence[float], order: int) -> np.ndarray:
    """Moments of the density translated by shift, from binomial expansion."""
    index = _index_table(order)
    s = np.asarray(shift, dtype=float)
    result = np.zeros_like(moments)
    for position, (a, b, c) in enumerate(multi_indices(order)):
        total = 0.0
        for i in range(a + 1):
            for j in range(b + 1):
                for k in range(c + 1):
                    coefficient = special.comb(a, i, exact=True) * special.comb(b, j, exact=True) \
                        * special.comb(c, k, exact=True)
                    total += coefficient * s[0] ** (a - i) * s[1] ** (b - j) * s[2] ** (c - k) \
                        * moments[index[(i, j, k)]]
        result[position] = total
    return result


def interaction_coefficients(moments_a: np.ndarray, moments_b: np.ndarray, order: int) -> np.ndarray:
    """
    Collapse the double sum onto gamma = alpha + beta.

    Returns:
        Coefficients over multi_indices(2 * order), to be contracted with
        coulomb_derivatives(D, 2 * order).
    """
    indices = multi_indices(order)
    target = _index_table(2 * order)
    factorial = [math.factorial(p) for p in range(order + 1)]
    result = np.zeros(len(multi_indices(2 * order)))
    for i, alpha in enumerate(indices):
        if moments_a[i] == 0.0:
            continue
        sign = -1.0 if sum(alpha) % 2 else 1.0
        fa = factorial[alpha[0]] * factorial[alpha[1]] * factorial[alpha[2]]
        for j, beta in enumerate(indices):
            if moments_b[j] == 0.0:
                continue
            fb = factorial[beta[0]] * factorial[beta[1]] * factorial[beta[2]]
            gamma = (alpha[0] + beta[0], alpha[1] + beta[1], alpha[2] + beta[2])
            result[target[gamma]] += sign * moments_a[i] * moments_b[j] / (fa * fb)
    return result


def multipole_interaction(moments_a: np.ndarray, moments_b: np.ndarray,
                          displacements: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """
    Coulomb interaction of rho_a at 0 with rho_b at each displacement.

    Accurate when |D| is large against the supports; terms beyond 2 * order
    in total degree are dropped.
    """
    coefficients = interaction_coefficients(moments_a, moments_b, order)
    return coulomb_derivatives(displacements, 2 * order) @ coefficients


def traceless_quadrupole(moments: np.ndarray, order: int) -> np.ndarray:
    """P_ij = integral of rho (3 x_i x_j - delta_ij |x|^2) from Cartesian moments."""
    index = _index_table(order)
    second = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            alpha = [0, 0, 0]
            alpha[i] += 1
            alpha[j] += 1
            second[i, j] = moments[index[tuple(alpha)]]
    return 3.0 * second - np.trace(second) * np.eye(3)


def low_order_moments(moments: np.ndarray, order: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """(q, d, P) from Cartesian moments."""
    index = _index_table(order)
    q = float(moments[index[(0, 0, 0)]])
    d = np.array([moments[index[(1, 0, 0)]], moments[index[(0, 1, 0)]], moments[index[(0, 0, 1)]]])
    return q, d, traceless_quadrupole(moments, order)


def legendre_remainder(distance: float, radius: float) -> float:
    """
    Bound on |1/|a - b| - T3(a, b)| for |a| = distance and |b| <= radius < distance.

    Sum over l >= 3 of radius^l / distance^(l+1).
    """
    return radius**3 / (distance**3 * (distance - radius))
