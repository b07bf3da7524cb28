"""
Coulomb and Yukawa kernels, their third-order Taylor expansion, and the
deterministic quadratures for integrals of 1/|x| over boxes.

Box integrals of w(v) / |lambda * v| are computed by splitting the box at the
origin (and at any kink of the weight) and treating each piece by one of two
Gauss-Legendre rules:

- a piece with the origin as a corner is cut into three pyramids with apex at
  the origin; the radial substitution v = t * p makes every pyramid integrand
  smooth;
- a piece well separated from the origin uses a plain tensor product rule.

Pieces close to, but not touching, the origin are reduced to corner pieces by
inclusion-exclusion.
"""

import functools
import itertools
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ldlab.shared.data_types import ErrorCode, LdlabError

logger = logging.getLogger("ldlab")

# Remainder constant of taylor_third_order: |1/|a-b| - T3(a, b)| <= TAYLOR_REMAINDER_CONSTANT |b|^3 / |a|^4.
TAYLOR_REMAINDER_CONSTANT = 20.0

DEFAULT_NODES = 16

# Integral of 1/|y| over the unit cube centered at the origin: 3 (ln(2 + sqrt 3) - pi / 6).
CUBE_CENTER_POTENTIAL = 3.0 * (math.log(2.0 + math.sqrt(3.0)) - math.pi / 6.0)

WeightFunction = Callable[[np.ndarray], np.ndarray]


@functools.lru_cache(maxsize=None)
def gauss_legendre_unit(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def coulomb(x) -> float:
    """
    Evaluate the Coulomb kernel 1/|x|.

    Args:
        x: A 3-vector, or an array of 3-vectors along the last axis.

    Returns:
        The kernel value(s).

    Raises:
        LdlabError: SINGULAR_INPUT if any x is the origin.
    """
    points = np.asarray(x, dtype=float)
    r = _norms(points)
    if np.any(r == 0.0):
        raise LdlabError(ErrorCode.SINGULAR_INPUT, "Coulomb kernel evaluated at the origin.")
    return _scalar_or_array(1.0 / r)


def yukawa(omega: float, x) -> float:
    """
    Evaluate the Yukawa kernel exp(-omega |x|) / |x|.

    Raises:
        LdlabError: NONPOSITIVE_RATE for omega <= 0, SINGULAR_INPUT at the origin.
    """
    if not omega > 0.0:
        raise LdlabError(ErrorCode.NONPOSITIVE_RATE, f"Yukawa mass must be positive, got {omega}.")
    points = np.asarray(x, dtype=float)
    r = _norms(points)
    if np.any(r == 0.0):
        raise LdlabError(ErrorCode.SINGULAR_INPUT, "Yukawa kernel evaluated at the origin.")
    return _scalar_or_array(np.exp(-omega * r) / r)


def taylor_third_order(a, b) -> float:
    """
    Expand 1/|a - b| around a to second order in b.

    T3(a, b) = 1/|a| + a.b/|a|^3 + (3 (a.b)^2 - |a|^2 |b|^2) / (2 |a|^5); the
    neglected remainder is bounded by TAYLOR_REMAINDER_CONSTANT |b|^3 / |a|^4.

    Args:
        a: Expansion point(s), nonzero.
        b: Displacement(s) with |a| >= 4 |b|.

    Raises:
        LdlabError: PRECONDITION_VIOLATED if |a| < 4 |b| or a = 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ra = _norms(a)
    rb = _norms(b)
    if np.any(ra == 0.0) or np.any(ra < 4.0 * rb * (1.0 - 1e-12)):
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, "Taylor expansion needs |a| >= 4|b| and a != 0.")
    ab = np.sum(a * b, axis=-1)
    value = 1.0 / ra + ab / ra**3 + (3.0 * ab**2 - ra**2 * rb**2) / (2.0 * ra**5)
    return _scalar_or_array(value)


def coulomb_multiplier(k) -> float:
    """Fourier multiplier of 1/|x| in the unitary angular convention: sqrt(2/pi) / |k|^2."""
    k2 = np.sum(np.asarray(k, dtype=float) ** 2, axis=-1)
    return _scalar_or_array(math.sqrt(2.0 / math.pi) / k2)


def yukawa_multiplier(omega: float, k) -> float:
    """Fourier multiplier of the Yukawa kernel: sqrt(2/pi) / (|k|^2 + omega^2)."""
    k2 = np.sum(np.asarray(k, dtype=float) ** 2, axis=-1)
    return _scalar_or_array(math.sqrt(2.0 / math.pi) / (k2 + omega**2))


def yukawa_space_integral(omega: float) -> float:
    """
    Integral of the Yukawa kernel over all of space, 4 pi / omega^2.

    Raises:
        LdlabError: NONPOSITIVE_RATE for omega <= 0.
    """
    if not omega > 0.0:
        raise LdlabError(ErrorCode.NONPOSITIVE_RATE, f"Yukawa mass must be positive, got {omega}.")
    return 4.0 * math.pi / omega**2


def _kernel(points: np.ndarray, scale: np.ndarray, screening: float) -> np.ndarray:
    r = _norms(points * scale)
    values = 1.0 / r
    if screening:
        values = values * np.exp(-screening * r)
    return values


def _corner_box_integral(corner: np.ndarray, weight: Optional[WeightFunction], scale: np.ndarray,
                         screening: float, nodes: int) -> float:
    """Integral over the box spanned by the origin and `corner`, via three pyramids."""
    volume = abs(float(np.prod(corner)))
    if volume == 0.0:
        return 0.0
    t, wt = gauss_legendre_unit(nodes)
    s, ws = gauss_legendre_unit(nodes)
    total = 0.0
    for axis in range(3):
        others = [b for b in range(3) if b != axis]
        # Points p on the far face v[axis] = corner[axis].
        face = np.empty((nodes, nodes, 3))
        face[..., axis] = corner[axis]
        face[..., others[0]] = corner[others[0]] * s[:, None]
        face[..., others[1]] = corner[others[1]] * s[None, :]
        face_norm = _norms(face * scale)
        if weight is None and not screening:
            inner = 0.5 * np.ones_like(face_norm)
        else:
            # Radial factor t * w(t p) * exp(-screening t |p|), integrated over t.
            radial = t[:, None, None, None] * face[None, ...]
            values = np.ones(radial.shape[:-1]) if weight is None else weight(radial)
            if screening:
                values = values * np.exp(-screening * t[:, None, None] * face_norm[None, ...])
            inner = np.tensordot(wt * t, values, axes=(0, 0))
        total += float(np.einsum("i,j,ij->", ws, ws, inner / face_norm))
    return volume * total


def _tensor_box_integral(lower: np.ndarray, upper: np.ndarray, weight: Optional[WeightFunction],
                         scale: np.ndarray, screening: float, nodes: int) -> float:
    x, w = gauss_legendre_unit(nodes)
    widths = upper - lower
    axes = [lower[i] + widths[i] * x for i in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = _kernel(grid, scale, screening)
    if weight is not None:
        values = values * weight(grid)
    return float(np.einsum("i,j,k,ijk->", w, w, w, values)) * float(np.prod(widths))


def _orthant_box_integral(lower: np.ndarray, upper: np.ndarray, weight: Optional[WeightFunction],
                          scale: np.ndarray, screening: float, nodes: int) -> float:
    """Integral over a box lying in one closed orthant."""
    near = np.where(np.abs(lower) <= np.abs(upper), lower, upper)
    far = np.where(np.abs(lower) <= np.abs(upper), upper, lower)
    if np.all(near == 0.0):
        return _corner_box_integral(far, weight, scale, screening, nodes)
    distance = float(np.linalg.norm(near * scale))
    size = float(np.max(np.abs(far - near) * scale))
    if distance >= size:
        return _tensor_box_integral(lower, upper, weight, scale, screening, nodes)
    # Inclusion-exclusion over the eight boxes spanned by the origin and a vertex.
    total = 0.0
    for signs in np.ndindex(2, 2, 2):
        vertex = np.where(np.array(signs) == 1, far, near)
        parity = 3 - sum(signs)
        total += (-1) ** parity * _corner_box_integral(vertex, weight, scale, screening, nodes)
    return total


def singular_box_integral(lower: Sequence[float], upper: Sequence[float],
                          weight: Optional[WeightFunction] = None,
                          breaks: Optional[Sequence[float]] = None,
                          anisotropy: Optional[Sequence[float]] = None,
                          screening: float = 0.0,
                          nodes: int = DEFAULT_NODES) -> float:
    """
    Integrate w(v) exp(-screening |lambda v|) / |lambda v| over an axis-aligned box.

    Args:
        lower: Lower box corner.
        upper: Upper box corner.
        weight: Optional weight, smooth on every piece between breaks.
        breaks: Per-axis kink positions of the weight (a 3-vector).
        anisotropy: Componentwise scaling lambda of the kernel argument.
        screening: Yukawa mass in box coordinates; 0 gives the Coulomb kernel.
        nodes: Gauss-Legendre nodes per axis and piece.

    Returns:
        The integral value.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    scale = np.ones(3) if anisotropy is None else np.asarray(anisotropy, dtype=float)
    cuts = []
    for axis in range(3):
        points = {lower[axis], upper[axis]}
        candidates = [0.0] + ([] if breaks is None else [float(breaks[axis])])
        points.update(c for c in candidates if lower[axis] < c < upper[axis])
        cuts.append(sorted(points))
    total = 0.0
    for i in range(len(cuts[0]) - 1):
        for j in range(len(cuts[1]) - 1):
            for k in range(len(cuts[2]) - 1):
                lo = np.array([cuts[0][i], cuts[1][j], cuts[2][k]])
                hi = np.array([cuts[0][i + 1], cuts[1][j + 1], cuts[2][k + 1]])
                total += _orthant_box_integral(lo, hi, weight, scale, screening, nodes)
    return total


def cube_potential_integral(l: float, mu: Sequence[float], nodes: int = DEFAULT_NODES) -> float:
    """
    Integral of 1/|y| over the cube of side l centered at l * mu.

    Homogeneous of degree two in l for fixed mu; the centered cube gives
    CUBE_CENTER_POTENTIAL * l^2.

    Raises:
        LdlabError: INVALID_INPUT for l <= 0.
    """
    if not l > 0.0:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Cube side must be positive, got {l}.")
    center = l * np.asarray(mu, dtype=float)
    return singular_box_integral(center - 0.5 * l, center + 0.5 * l, nodes=nodes)


def box_potential_integral(sides: Sequence[float], center: Sequence[float],
                           nodes: int = DEFAULT_NODES) -> float:
    """Integral of 1/|y| over the cuboid with the given sides and center."""
    sides = np.asarray(sides, dtype=float)
    center = np.asarray(center, dtype=float)
    return singular_box_integral(center - 0.5 * sides, center + 0.5 * sides, nodes=nodes)


@functools.lru_cache(maxsize=4096)
def correlation_kernel(displacement: Tuple[int, int, int],
                       anisotropy: Tuple[float, float, float] = (1.0, 1.0, 1.0),
                       screening: float = 0.0,
                       nodes: int = DEFAULT_NODES) -> float:
    """
    Reduced cell-pair kernel W(d) for unit cells.

    W(d) = integral over [-1, 1]^3 of prod(1 - |u_i|) K(lambda (d + u)) du, which
    equals the double integral of K(x - y) over two unit cells displaced by d.
    With d = 0 this is the self-cell constant.

    Args:
        displacement: Integer displacement between the cells.
        anisotropy: Cell side lengths relative to the unit (cuboid cells).
        screening: Yukawa mass in units of the unit cell; 0 for Coulomb.
        nodes: Gauss-Legendre nodes per axis and piece.
    """
    d = np.asarray(displacement, dtype=float)

    def tent(points: np.ndarray) -> np.ndarray:
        return np.prod(np.clip(1.0 - np.abs(points - d), 0.0, None), axis=-1)

    value = singular_box_integral(d - 1.0, d + 1.0, weight=tent, breaks=d,
                                  anisotropy=anisotropy, screening=screening, nodes=nodes)
    logger.debug(f"correlation kernel {displacement} anisotropy={anisotropy} screening={screening}: {value}")
    return value


def self_cell_constant(anisotropy: Tuple[float, float, float] = (1.0, 1.0, 1.0)) -> float:
    """Double integral of 1/|x - y| over a unit cell (scaled by anisotropy) with itself."""
    return correlation_kernel((0, 0, 0), tuple(float(a) for a in anisotropy))


def _log_r_plus(a: np.ndarray, r: np.ndarray, rest2: np.ndarray) -> np.ndarray:
    # ln(a + r), using a + r = rest2 / (r - a) when a < 0.
    negative = a < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(negative,
                        np.log(np.where(negative, rest2, 1.0)) - np.log(np.where(negative, r - a, 1.0)),
                        np.log(np.where(negative, 1.0, a + r)))


def _prism_antiderivative(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    r = np.sqrt(u * u + v * v + w * w)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (np.where(v * w != 0.0, v * w * _log_r_plus(u, r, v * v + w * w), 0.0)
                 + np.where(u * w != 0.0, u * w * _log_r_plus(v, r, u * u + w * w), 0.0)
                 + np.where(u * v != 0.0, u * v * _log_r_plus(w, r, u * u + v * v), 0.0)
                 - 0.5 * u * u * np.where(u != 0.0, np.arctan(v * w / (u * r)), 0.0)
                 - 0.5 * v * v * np.where(v != 0.0, np.arctan(u * w / (v * r)), 0.0)
                 - 0.5 * w * w * np.where(w != 0.0, np.arctan(u * v / (w * r)), 0.0))
    return value


def box_potential(points, lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    """
    Closed-form potential of the uniform unit-density box at the given points.

    Integral over the box of 1/|y - x| dy, from the classical rectangular prism
    antiderivative evaluated at the eight corners.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    total = np.zeros(len(x))
    for corner in itertools.product((0, 1), repeat=3):
        sign = (-1) ** (3 - sum(corner))
        edge = np.where(np.array(corner) == 1, upper, lower)
        relative = edge[None, :] - x
        total += sign * _prism_antiderivative(relative[:, 0], relative[:, 1], relative[:, 2])
    return total


@functools.lru_cache(maxsize=None)
def cube_face_integral(power: float, nodes: int = 48) -> float:
    """
    6 times the integral over [-1, 1]^2 of (1 + u^2 + w^2)^(-power).

    With power 2 this is R times the integral of |x|^-4 outside the cube of half-side R.
    """
    x, w = leggauss(nodes)
    u, v = np.meshgrid(x, x, indexing="ij")
    return 6.0 * float(np.einsum("i,j,ij->", w, w, (1.0 + u**2 + v**2) ** (-power)))
