"""
Lattice competitor for the upper bound and its three-part energy estimate.

The competitor places one copy of a droplet template in every cell of a cubic
lattice filling Q_L, rescaled so that the droplets carry exactly the
background charge of the box. Its interaction splits into per-cell self
energies, near pairs (1 <= |r - s|_inf <= M) evaluated semi-analytically, and
far pairs (|r - s|_inf > M) evaluated by multipole expansion and bounded
through the third-order remainder of 1/|x|.

The same module holds the moment-killing transform that makes a general
template neutral with vanishing dipole and quadrupole inside an adapted
cuboid cell, and the cuboid-lattice competitor built from it.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize
from scipy.spatial.distance import cdist

from ldlab.numerics import multipole
from ldlab.numerics.energy import EnergyBreakdown, ReferenceConstants, autocorrelation
from ldlab.numerics.geometry import CuboidSpec, ShapeSample, VoxelSet, cuboid_moments
from ldlab.numerics.kernels import box_potential, correlation_kernel, cube_face_integral
from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import ensure, loglog_slope, validate_fraction, validate_positive

logger = logging.getLogger("ldlab")

DEFAULT_NEAR_CUTOFF = 10
THRESHOLD_PRODUCT = 10.0
BOUNDARY_CONSTANT = 10.0
FAR_PAIR_CONSTANT = 100.0
SEPARATION_CONSTANT = 4.0
INVARIANT_TOLERANCE = 1e-12
MULTIPOLE_ORDER = 6
SHAPE_ORDER = 8

MOMENT_KILL_THRESHOLD = 5.0
MOMENT_KILL_TOLERANCE = 1e-6
VOLUME_TOLERANCE = 1e-6
LAMBDA_DEVIATION_CONSTANT = 100.0
COEFFICIENT_CONSTANT = 48.0
CUBIC_RESIDUAL_TOLERANCE = 1e-12
JACOBI_TOLERANCE = 1e-14
JACOBI_MAX_SWEEPS = 50

# Tail of sum |s|^-4: midpoint-rule error constant and the cell geometry it uses.
TAIL_ERROR_CONSTANT = 2.5
HALF_DIAGONAL = math.sqrt(3.0) / 2.0


@dataclass(frozen=True, eq=False)
class TemplateSpec:
    """
    The droplet placed in every cell, in coordinates relative to the cell center.

    kind "ball" is a ball of the given radius centered at offset; kind "shape"
    is an arbitrary solid given by a ShapeSample.
    """
    kind: str
    radius: float = 0.0
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    shape: Optional[ShapeSample] = None

    @classmethod
    def ball(cls, radius: float, offset: Sequence[float] = (0.0, 0.0, 0.0)) -> "TemplateSpec":
        return cls("ball", float(radius), tuple(float(v) for v in offset))

    @classmethod
    def from_shape(cls, shape: ShapeSample) -> "TemplateSpec":
        return cls("shape", shape=shape)

    @property
    def volume(self) -> float:
        if self.kind == "ball":
            return 4.0 * math.pi / 3.0 * self.radius**3
        return self.shape.volume

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        return self.shape.diameter()

    def extent(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kind == "ball":
            center = np.asarray(self.offset)
            return center - self.radius, center + self.radius
        return self.shape.extent()

    def to_dict(self) -> Dict[str, object]:
        if self.kind == "ball":
            params = {"radius": self.radius, "offset": list(self.offset)}
        else:
            params = {"volume": self.volume, "diameter": self.diameter, "points": int(len(self.shape.points))}
        return {"kind": self.kind, "params": params}


@dataclass(frozen=True, eq=False)
class LatticeConfig:
    """
    A lattice competitor: template copies in the cells r of the lattice.

    Cell r is the cuboid of sides cell_sides centered at r * cell_sides. For
    the cubic lattice lambda_vec is None and every side equals
    lambda_scalar * l0.
    """
    theta: float
    L: float
    l0: float
    lambda_scalar: float
    cells: np.ndarray
    template: TemplateSpec
    near_cutoff: int = DEFAULT_NEAR_CUTOFF
    lambda_vec: Optional[Tuple[float, float, float]] = None
    a_star: float = field(default=0.0)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64).reshape(-1, 3)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if int(self.near_cutoff) != self.near_cutoff or self.near_cutoff < 1:
            raise LdlabError(ErrorCode.INVALID_INPUT, f"Near cutoff M must be an integer >= 1, got {self.near_cutoff}.")
        object.__setattr__(self, "near_cutoff", int(self.near_cutoff))

    @property
    def N(self) -> int:
        return len(self.cells)

    @property
    def anisotropy(self) -> np.ndarray:
        return np.ones(3) if self.lambda_vec is None else np.asarray(self.lambda_vec, dtype=float)

    @property
    def cell_sides(self) -> np.ndarray:
        return self.lambda_scalar * self.l0 * self.anisotropy

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_sides))

    @property
    def reference_side(self) -> float:
        """Geometric mean of the cell sides."""
        return self.cell_volume ** (1.0 / 3.0)

    @property
    def domain_sides(self) -> np.ndarray:
        return self.L * self.anisotropy

    def to_dict(self) -> Dict[str, object]:
        if self.lambda_vec is None:
            lam: Union[float, List[float]] = self.lambda_scalar
        else:
            lam = [float(v) for v in self.lambda_scalar * self.anisotropy]
        return {
            "theta": self.theta,
            "L": self.L,
            "l0": self.l0,
            "lambda": lam,
            "M": self.near_cutoff,
            "N": self.N,
            "cells": self.cells.tolist(),
            "template": self.template.to_dict(),
        }


@dataclass(frozen=True)
class FarFieldEstimate:
    """Rigorous bound on the far part, the multipole value it bounds, and whether the bound applies."""
    bound: float
    exact: float
    valid: bool

    def to_dict(self) -> Dict[str, object]:
        return {"bound": self.bound, "exact": self.exact, "valid": self.valid}


@dataclass(frozen=True)
class LatticeSum:
    """Partial sum of |s|^-4 over 0 < |s|_inf <= K and an enclosure [lower, upper] of the full sum."""
    K: int
    partial: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, object]:
        return {"K": self.K, "partial": self.partial, "lower": self.lower, "upper": self.upper}


def lattice_cells(K: int) -> np.ndarray:
    """All r in Z^3 with |r_i| <= K, in lexicographic order."""
    axis = np.arange(-K, K + 1)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    return grid.reshape(-1, 3)


def _cells_per_half_axis(L: float, l0: float) -> int:
    # Q_l(r) inside Q_L iff |r_i| l + l / 2 <= L / 2.
    return int(math.floor((L - l0) / (2.0 * l0) + 1e-9))


def _check_lattice_preconditions(theta: float, L: float) -> None:
    ensure(validate_fraction("theta", theta, lower_open=True))
    ensure(validate_positive("L", L))
    if theta > 0.5:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED,
                         f"The lattice competitor needs theta <= 1/2, got {theta}; use the complement competitor.")
    if theta ** (1.0 / 3.0) * L < THRESHOLD_PRODUCT:
        raise LdlabError(ErrorCode.THRESHOLD_VIOLATION,
                         f"theta^(1/3) L = {theta ** (1.0 / 3.0) * L!r} is below {THRESHOLD_PRODUCT}.")


def build_competitor(theta: float, L: float, refs: Optional[ReferenceConstants] = None,
                     near_cutoff: int = DEFAULT_NEAR_CUTOFF,
                     offset: Sequence[float] = (0.0, 0.0, 0.0)) -> LatticeConfig:
    """
    Build the cubic lattice competitor with ball templates.

    The base cell l0 = (A* / theta)^(1/3) holds one reference droplet at
    density theta; cells are the lattice points whose cell fits in Q_L, and
    all lengths are then scaled by lambda with lambda^3 A* N = theta L^3.

    Args:
        theta: Background density in (0, 1/2].
        L: Box side.
        refs: Reference constants; the ball ansatz by default.
        near_cutoff: Near/far cutoff M.
        offset: Ball center relative to the cell center, in units of the scaled cell side.

    Returns:
        The lattice configuration.

    Raises:
        LdlabError: PRECONDITION_VIOLATED for theta > 1/2, THRESHOLD_VIOLATION
            when theta^(1/3) L < 10, EMPTY_SET when no cell fits.
    """
    refs = refs or ReferenceConstants.ball_ansatz()
    _check_lattice_preconditions(theta, L)
    l0 = (refs.aStar / theta) ** (1.0 / 3.0)
    K = _cells_per_half_axis(L, l0)
    if K < 0:
        raise LdlabError(ErrorCode.EMPTY_SET, f"No cell of side {l0!r} fits in Q_L with L = {L}.")
    cells = lattice_cells(K)
    lam = (theta * L**3 / (refs.aStar * len(cells))) ** (1.0 / 3.0)
    side = lam * l0
    template = TemplateSpec.ball(lam * refs.rStar, side * np.asarray(offset, dtype=float))
    lower, upper = template.extent()
    if np.any(lower < -0.5 * side) or np.any(upper > 0.5 * side):
        raise LdlabError(ErrorCode.CONTAINMENT_FAILURE, f"Ball with offset {list(offset)} leaves its cell.")
    config = LatticeConfig(theta=float(theta), L=float(L), l0=l0, lambda_scalar=lam, cells=cells,
                           template=template, near_cutoff=near_cutoff, a_star=refs.aStar)
    logger.info(f"Built lattice competitor: theta={theta!r} L={L!r} l0={l0!r} N={config.N} lambda={lam!r}")
    check_invariants(config)
    return config


def check_invariants(config: LatticeConfig) -> Dict[str, bool]:
    """
    Check the lattice invariants and log a warning for every failure.

    Returns:
        A dictionary from invariant name to pass/fail.
    """
    theta, L, l0, N = config.theta, config.L, config.l0, config.N
    a_star = config.a_star
    lam3 = config.lambda_scalar**3
    side = config.reference_side
    lower, upper = config.template.extent()
    half = 0.5 * config.cell_sides
    checks = {
        "base_cell_mass": abs(theta * l0**3 - a_star) <= INVARIANT_TOLERANCE * a_star,
        "mass_constraint": abs(lam3 * a_star * N - theta * L**3) <= INVARIANT_TOLERANCE * theta * L**3,
        "rescaling_range": 1.0 - INVARIANT_TOLERANCE <= lam3 <= 1.0 + BOUNDARY_CONSTANT * l0 / L,
        "cell_count": L**3 / l0**3 - BOUNDARY_CONSTANT * L**2 / l0**2 <= N <= L**3 / l0**3 * (1.0 + 1e-12),
        "near_cutoff": config.near_cutoff >= 1,
        "local_neutrality": abs(config.template.volume - theta * config.cell_volume)
        <= INVARIANT_TOLERANCE * max(1.0, theta * config.cell_volume),
        "disjointness": bool(np.all(lower > -half) and np.all(upper < half)),
        "separation": config.template.diameter <= (1.0 - 1.0 / SEPARATION_CONSTANT) * side,
    }
    for name, passed in checks.items():
        if not passed:
            logger.warning(f"Lattice invariant '{name}' fails for theta={theta!r} L={L!r}")
    return checks


def separation_distance(config: LatticeConfig) -> float:
    """Lower bound on the distance between points of template copies in distinct cells."""
    lower, upper = config.template.extent()
    sides = config.cell_sides
    # Along each axis, copies in neighboring cells are sides - (upper - lower) apart.
    return float(np.min(sides - (upper - lower)))


def _cell_layout(config: LatticeConfig) -> Tuple[np.ndarray, float, Tuple[float, float, float]]:
    sides = config.cell_sides
    l_ref = config.reference_side
    return sides, l_ref, tuple(float(v) for v in sides / l_ref)


def _box_potential_at(points: np.ndarray, sides: np.ndarray, center: np.ndarray) -> np.ndarray:
    return box_potential(points, center - 0.5 * sides, center + 0.5 * sides)


def cell_self_energy(config: LatticeConfig) -> Tuple[float, float]:
    """
    Perimeter and interaction of one cell: template against itself and the cell background.

    Raises:
        LdlabError: TEMPLATE_NOT_SUPPORTED for non-ball templates.
    """
    template = config.template
    if template.kind != "ball":
        raise LdlabError(ErrorCode.TEMPLATE_NOT_SUPPORTED,
                         f"Self energies are evaluated for ball templates only, got {template.kind!r}.")
    theta = config.theta
    sides, l_ref, anisotropy = _cell_layout(config)
    r = template.radius
    charge = template.volume
    ball_ball = 32.0 * math.pi**2 / 15.0 * r**5
    # Mean of the cell potential over the ball: harmonic part at the center minus the -4 pi Laplacian term.
    center_potential = float(_box_potential_at(np.asarray([template.offset]), sides, np.zeros(3))[0])
    ball_cell = charge * (center_potential - 0.4 * math.pi * r**2)
    cell_cell = l_ref**5 * correlation_kernel((0, 0, 0), anisotropy)
    interaction = 0.5 * (ball_ball - 2.0 * theta * ball_cell + theta**2 * cell_cell)
    return 4.0 * math.pi * r**2, interaction


def _template_points(template: TemplateSpec) -> Tuple[np.ndarray, np.ndarray]:
    if template.kind == "ball":
        sample = ShapeSample.ball(template.radius, template.offset, order=SHAPE_ORDER)
    else:
        sample = template.shape
    return sample.points, sample.weights


def cell_moments(config: LatticeConfig, order: int = MULTIPOLE_ORDER) -> np.ndarray:
    """Cartesian moments of the signed cell density (template minus theta times the cell)."""
    template = config.template
    if template.kind == "ball":
        droplet = multipole.shifted_moments(multipole.ball_moments(template.radius, order), template.offset, order)
    else:
        droplet = multipole.point_moments(template.shape.points, template.shape.weights, order)
    return droplet - config.theta * multipole.cuboid_moments(config.cell_sides, order)


def _direct_pair(config: LatticeConfig, k: np.ndarray) -> float:
    theta = config.theta
    sides, l_ref, anisotropy = _cell_layout(config)
    D = k * sides
    template = config.template
    cell_cell = l_ref**5 * correlation_kernel(tuple(int(abs(v)) for v in k), anisotropy)
    if template.kind == "ball":
        charge = template.volume
        o = np.asarray(template.offset)
        droplet_droplet = charge**2 / float(np.linalg.norm(D))
        droplet_cell = charge * (float(_box_potential_at(o[None, :], sides, D)[0])
                                 + float(_box_potential_at((o + D)[None, :], sides, np.zeros(3))[0]))
    else:
        points, weights = _template_points(template)
        droplet_droplet = float(weights @ (1.0 / cdist(points, points + D)) @ weights)
        droplet_cell = float(weights @ _box_potential_at(points, sides, D)
                             + weights @ _box_potential_at(points + D, sides, np.zeros(3)))
    return droplet_droplet - theta * droplet_cell + theta**2 * cell_cell


def displacement_energy(config: LatticeConfig, k: Sequence[int], method: str = "auto") -> float:
    """
    Interaction of the cell at 0 with the cell at lattice displacement k.

    Args:
        config: Lattice configuration.
        k: Nonzero integer displacement.
        method: "direct" (semi-analytic or quadrature), "multipole", or "auto"
            (multipole beyond the near cutoff).

    Raises:
        LdlabError: INVALID_INPUT for k = 0 or an unknown method.
    """
    k = np.asarray(k, dtype=np.int64)
    if k.shape != (3,) or not np.any(k):
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Displacement must be a nonzero lattice vector, got {k.tolist()}.")
    if method == "auto":
        method = "multipole" if int(np.max(np.abs(k))) > config.near_cutoff else "direct"
    if method == "direct":
        return _direct_pair(config, k)
    if method == "multipole":
        moments = cell_moments(config)
        D = (k * config.cell_sides)[None, :]
        return float(multipole.multipole_interaction(moments, moments, D, MULTIPOLE_ORDER)[0])
    raise LdlabError(ErrorCode.INVALID_INPUT, f"Unknown method {method!r}; expected auto, direct or multipole.")


def pair_interaction(config: LatticeConfig, r: Sequence[int], s: Sequence[int]) -> float:
    """
    Coulomb interaction of the signed densities of cells r and s.

    Raises:
        LdlabError: INVALID_INPUT if r = s or either point is not a cell.
    """
    r = np.asarray(r, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if np.array_equal(r, s):
        raise LdlabError(ErrorCode.INVALID_INPUT, "r = s: use the cell self energy.")
    members = {tuple(cell) for cell in config.cells.tolist()}
    for point in (r, s):
        if tuple(point.tolist()) not in members:
            raise LdlabError(ErrorCode.INVALID_INPUT, f"{point.tolist()} is not a cell of the lattice.")
    return displacement_energy(config, s - r)


def displacement_counts(cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Number of ordered cell pairs (r, r + k) for every nonzero displacement k.

    Returns:
        (displacements (m, 3), counts (m,)) with zero counts dropped.
    """
    cells = np.asarray(cells, dtype=np.int64)
    origin = cells.min(axis=0)
    size = int((cells.max(axis=0) - origin).max()) + 1
    grid = np.zeros((size, size, size))
    index = cells - origin
    grid[index[:, 0], index[:, 1], index[:, 2]] = 1.0
    counts = np.rint(autocorrelation(grid)).astype(np.int64)
    center = size - 1
    nonzero = np.argwhere(counts > 0)
    displacements = nonzero - center
    keep = np.any(displacements != 0, axis=1)
    displacements = displacements[keep]
    return displacements, counts[tuple(nonzero[keep].T)]


def _near_class_key(config: LatticeConfig, k: np.ndarray) -> Tuple[int, ...]:
    cubic = config.lambda_vec is None or np.allclose(config.anisotropy, 1.0, rtol=0.0, atol=1e-15)
    centered = config.template.kind == "ball" and not any(config.template.offset)
    if cubic and centered:
        return tuple(sorted(int(abs(v)) for v in k))
    return tuple(int(v) for v in k)


def decompose_energy(config: LatticeConfig) -> EnergyBreakdown:
    """
    Perimeter and interaction of the competitor, with the interaction split
    into (self, near, far) parts.

    Raises:
        LdlabError: TEMPLATE_NOT_SUPPORTED for non-ball templates.
    """
    per_cell_perimeter, self_interaction = cell_self_energy(config)
    displacements, counts = displacement_counts(config.cells)
    chebyshev = np.max(np.abs(displacements), axis=1) if len(displacements) else np.zeros(0)
    near_mask = chebyshev <= config.near_cutoff

    cache: Dict[Tuple[int, ...], float] = {}
    near_terms = []
    for k, count in zip(displacements[near_mask], counts[near_mask]):
        key = _near_class_key(config, k)
        if key not in cache:
            cache[key] = _direct_pair(config, k)
        near_terms.append(0.5 * count * cache[key])
    near = math.fsum(near_terms)

    far = 0.0
    far_displacements = displacements[~near_mask]
    if len(far_displacements):
        moments = cell_moments(config)
        values = multipole.multipole_interaction(moments, moments, far_displacements * config.cell_sides,
                                                 MULTIPOLE_ORDER)
        far = math.fsum(0.5 * counts[~near_mask] * values)

    self_part = config.N * self_interaction
    perimeter = config.N * per_cell_perimeter
    logger.debug(f"decompose_energy N={config.N}: {len(cache)} near classes, "
                 f"{len(far_displacements)} far displacements")
    return EnergyBreakdown(perimeter, math.fsum((self_part, near, far)), (self_part, near, far))


def far_field_bound(config: LatticeConfig) -> FarFieldEstimate:
    """
    Bound the far part by the remainder of the second-order expansion of 1/|D + b|.

    With neutral cells of vanishing dipole, every far pair is at most
    (2 theta |cell|)^2 b^3 / (|D|^3 (|D| - b)) where b is the cell diameter.
    The bound is reported invalid when the template carries a dipole.
    """
    displacements, counts = displacement_counts(config.cells)
    sides = config.cell_sides
    if len(displacements):
        far_mask = np.max(np.abs(displacements), axis=1) > config.near_cutoff
        displacements, counts = displacements[far_mask], counts[far_mask]
    if len(displacements) == 0:
        return FarFieldEstimate(0.0, 0.0, True)
    moments = cell_moments(config)
    q, d, _ = multipole.low_order_moments(moments, MULTIPOLE_ORDER)
    scale = config.theta * config.cell_volume
    valid = abs(q) <= 1e-9 * scale and float(np.linalg.norm(d)) <= 1e-9 * scale * config.reference_side
    b = float(np.linalg.norm(sides))
    distances = np.linalg.norm(displacements * sides, axis=1)
    mass = (2.0 * scale) ** 2
    if np.any(distances <= b):
        bound = math.inf
    else:
        bound = math.fsum(0.5 * counts * mass * b**3 / (distances**3 * (distances - b)))
    exact = math.fsum(0.5 * counts * multipole.multipole_interaction(moments, moments, displacements * sides,
                                                                     MULTIPOLE_ORDER))
    if not valid:
        logger.warning("far_field_bound: template dipole does not vanish, the bound does not apply")
    return FarFieldEstimate(bound, exact, valid)


def far_pair_magnitude_bound(config: LatticeConfig, k: Sequence[int]) -> float:
    """kappa (1 + theta l^3)(1 + theta l^6) / (l^4 |k|^4) with kappa = 100 and l the cell side."""
    l = config.reference_side
    theta = config.theta
    distance = float(np.linalg.norm(np.asarray(k, dtype=float)))
    return FAR_PAIR_CONSTANT * (1.0 + theta * l**3) * (1.0 + theta * l**6) / (l**4 * distance**4)


def far_field_decay(config: LatticeConfig, distances: Sequence[int] = tuple(range(10, 41)),
                    direction: Sequence[int] = (1, 0, 0)) -> Dict[str, object]:
    """
    Pair interaction along a lattice direction and its fitted log-log slope.

    Values come from the multipole expansion, which stays accurate where the
    direct evaluation is dominated by cancellation.
    """
    step = np.asarray(direction, dtype=np.int64)
    values = [displacement_energy(config, j * step, method="multipole") for j in distances]
    lengths = [float(j * np.linalg.norm(step * config.cell_sides)) for j in distances]
    slope = loglog_slope(lengths, values)
    logger.debug(f"far_field_decay: slope={slope!r} over {len(values)} distances")
    return {"distances": list(distances), "values": values, "slope": slope}


def _raw_tail_bracket(partial: float, K: int) -> Tuple[float, float]:
    R = K + 0.5
    t = R - 2.0 * HALF_DIAGONAL
    if t <= 0.0:
        return partial, math.inf
    center = cube_face_integral(2.0) / R
    b = 2.0 * HALF_DIAGONAL
    half_width = TAIL_ERROR_CONSTANT * 4.0 * math.pi * (1.0 / (3.0 * t**3) + b / (2.0 * t**4) + b**2 / (5.0 * t**5))
    return partial + max(center - half_width, 0.0), partial + center + half_width


@functools.lru_cache(maxsize=None)
def _shell_sums(K: int) -> Tuple[float, ...]:
    axis = np.arange(-K, K + 1)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    shell = np.maximum.reduce([np.abs(x), np.abs(y), np.abs(z)])
    r2 = (x**2 + y**2 + z**2).astype(float)
    sums = []
    for j in range(1, K + 1):
        sums.append(math.fsum(1.0 / r2[shell == j] ** 2))
    return tuple(sums)


def lattice_sum_inv4(K: int) -> LatticeSum:
    """
    Sum of |s|^-4 over Z^3 without the origin: partial sum and enclosure.

    The tail over |s|_inf > K is compared with the integral of |x|^-4 outside
    the cube of half-side K + 1/2; the midpoint-rule error is controlled by the
    Hessian of |x|^-4. Enclosures for K' <= K are intersected, so they are nested.

    Raises:
        LdlabError: INVALID_INPUT for K < 1.
    """
    if int(K) != K or K < 1:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Truncation radius must be an integer >= 1, got {K}.")
    sums = _shell_sums(int(K))
    lower, upper = 0.0, math.inf
    partial = 0.0
    for j, shell in enumerate(sums, start=1):
        partial += shell
        lo, hi = _raw_tail_bracket(partial, j)
        lower, upper = max(lower, lo), min(upper, hi)
    return LatticeSum(int(K), partial, lower, upper)


def jacobi_diagonalize(matrix: np.ndarray, tolerance: float = JACOBI_TOLERANCE) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi rotations on a symmetric 3x3 matrix.

    Returns:
        (eigenvalues, V) with matrix = V diag(eigenvalues) V^T and V orthogonal.

    Raises:
        LdlabError: INVALID_INPUT for a non-symmetric or non-3x3 matrix.
    """
    a = np.array(matrix, dtype=float)
    if a.shape != (3, 3) or not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(a).max()))):
        raise LdlabError(ErrorCode.INVALID_INPUT, "Jacobi diagonalization needs a symmetric 3x3 matrix.")
    a = 0.5 * (a + a.T)
    v = np.eye(3)
    scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= tolerance * scale:
            logger.debug(f"Jacobi converged after {sweep} sweeps")
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if a[p, q] == 0.0:
                continue
            ratio = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
            t = math.copysign(1.0, ratio) / (abs(ratio) + math.sqrt(1.0 + ratio * ratio))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            rotation = np.eye(3)
            rotation[p, p] = rotation[q, q] = c
            rotation[p, q] = s
            rotation[q, p] = -s
            a = rotation.T @ a @ rotation
            a[p, q] = a[q, p] = 0.0
            v = v @ rotation
    return np.diag(a).copy(), v


def cubic_polynomial(X: float, c1: float, c2: float) -> float:
    """p(X) = X^3 - c1 X^2 - c2^2 X - 1 + c1 c2^2."""
    return X**3 - c1 * X**2 - c2**2 * X - 1.0 + c1 * c2**2


def cubic_root_near_one(c1: float, c2: float) -> float:
    """
    The real root of p with |X - 1| <= 1/2.

    Newton from X = 1; when it leaves the window or misses the residual,
    Brent's method on [1/2, 3/2].

    Raises:
        LdlabError: NO_ROOT_IN_BRACKET if p has no sign change on [1/2, 3/2].
    """
    def p(X: float) -> float:
        return cubic_polynomial(X, c1, c2)

    def dp(X: float) -> float:
        return 3.0 * X**2 - 2.0 * c1 * X - c2**2

    try:
        solution = optimize.root_scalar(p, fprime=dp, x0=1.0, method="newton", xtol=1e-15, maxiter=100)
        if solution.converged and abs(solution.root - 1.0) <= 0.5 and abs(p(solution.root)) <= CUBIC_RESIDUAL_TOLERANCE:
            logger.debug(f"cubic root by Newton in {solution.iterations} iterations: {solution.root!r}")
            return float(solution.root)
    except (RuntimeError, ZeroDivisionError, OverflowError) as e:
        logger.debug(f"Newton failed for c1={c1!r} c2={c2!r}: {str(e)}")
    if p(0.5) * p(1.5) > 0.0:
        raise LdlabError(ErrorCode.NO_ROOT_IN_BRACKET,
                         f"p has no sign change on [1/2, 3/2] for c1={c1!r}, c2={c2!r}.")
    root = optimize.brentq(p, 0.5, 1.5, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)
    return float(root)


@dataclass(frozen=True, eq=False)
class MomentKillResult:
    """Rigid motion and cuboid scaling that cancel the low moments of template minus background."""
    U: np.ndarray
    y: np.ndarray
    lambda_vec: Tuple[float, float, float]
    eta0: float
    c1: float
    c2: float
    X: float
    l0: float
    theta: float
    shape: ShapeSample
    residual: Dict[str, float]
    coefficient_bound: float
    checks: Dict[str, bool]

    @property
    def a_star(self) -> float:
        return self.shape.volume

    @property
    def cell(self) -> CuboidSpec:
        return CuboidSpec(tuple(self.l0 * np.asarray(self.lambda_vec)))

    @property
    def verified(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "U": self.U.tolist(),
            "y": self.y.tolist(),
            "lambda": list(self.lambda_vec),
            "eta0": self.eta0,
            "c1": self.c1,
            "c2": self.c2,
            "X": self.X,
            "l0": self.l0,
            "theta": self.theta,
            "residual": dict(self.residual),
            "coefficient_bound": self.coefficient_bound,
            "checks": dict(self.checks),
        }


def moment_kill(shape: Union[VoxelSet, ShapeSample], l0: float, theta: float) -> MomentKillResult:
    """
    Translate, rotate and fit a cuboid cell so that 1_shape - theta 1_cell has
    zero charge, dipole and quadrupole.

    The translation moves the center of mass to the origin, the rotation
    diagonalizes the quadrupole to diag(a, b, -a-b), and the cell sides
    lambda_i l0 solve lambda_1^2 = X + c2, lambda_2^2 = X - c2,
    lambda_3 = 1 / (lambda_1 lambda_2) with X the root of the cubic near 1.

    Raises:
        LdlabError: PRECONDITION_VIOLATED if |shape| != theta l0^3,
            THRESHOLD_VIOLATION if l0 / diam < 5, NO_ROOT_IN_BRACKET,
            CONTAINMENT_FAILURE if the moved shape leaves the cell.
    """
    ensure(validate_positive("l0", l0))
    ensure(validate_fraction("theta", theta, lower_open=True))
    sample = ShapeSample.from_voxels(shape) if isinstance(shape, VoxelSet) else shape
    volume = sample.volume
    target = theta * l0**3
    if abs(volume - target) > VOLUME_TOLERANCE * target:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED,
                         f"Shape volume {volume!r} differs from theta l0^3 = {target!r}.")
    diameter = sample.diameter()
    eta0 = l0 / diameter
    if eta0 < MOMENT_KILL_THRESHOLD:
        raise LdlabError(ErrorCode.THRESHOLD_VIOLATION, f"eta0 = l0 / diam = {eta0!r} is below {MOMENT_KILL_THRESHOLD}.")

    m = sample.moments()
    y = -m.d / m.q
    centered = sample.translated(y)
    eigenvalues, V = jacobi_diagonalize(centered.moments().P)
    U = V.T
    a, b = float(eigenvalues[0]), float(eigenvalues[1])
    c1 = 6.0 * (a + b) / (volume * l0**2)
    c2 = 2.0 * (a - b) / (volume * l0**2)
    X = cubic_root_near_one(c1, c2)
    if X + c2 <= 0.0 or X - c2 <= 0.0:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, f"X = {X!r} gives a nonpositive cell side for c2 = {c2!r}.")
    l1, l2 = math.sqrt(X + c2), math.sqrt(X - c2)
    lam = (l1, l2, 1.0 / (l1 * l2))

    moved = sample.transformed(U, U @ y)
    cell = CuboidSpec(tuple(l0 * np.asarray(lam)))
    lower, upper = moved.extent()
    if np.any(lower < cell.lower) or np.any(upper > cell.upper):
        raise LdlabError(ErrorCode.CONTAINMENT_FAILURE, "The transformed shape leaves its cuboid cell.")
    rest = moved.moments() - cuboid_moments(cell, theta)
    residual = {
        "monopole": abs(rest.q) / volume,
        "dipole": float(np.abs(rest.d).max()) / (volume * l0),
        "quadrupole": float(np.abs(rest.P).max()) / (volume * l0**2),
    }
    coefficient_bound = COEFFICIENT_CONSTANT * diameter**2 / l0**2
    checks = {
        "orthogonal": float(np.abs(U.T @ U - np.eye(3)).max()) <= INVARIANT_TOLERANCE,
        "unit_determinant": abs(lam[0] * lam[1] * lam[2] - 1.0) <= INVARIANT_TOLERANCE,
        "lambda_near_one": max(abs(v - 1.0) for v in lam) <= LAMBDA_DEVIATION_CONSTANT / eta0**2,
        "cubic_residual": abs(cubic_polynomial(X, c1, c2)) <= CUBIC_RESIDUAL_TOLERANCE,
        "coefficients": max(abs(c1), abs(c2)) < coefficient_bound,
        "moments_vanish": max(residual.values()) <= MOMENT_KILL_TOLERANCE,
    }
    for name, passed in checks.items():
        if not passed:
            logger.warning(f"moment_kill check '{name}' fails (eta0={eta0!r})")
    logger.info(f"moment_kill: eta0={eta0!r} c1={c1!r} c2={c2!r} X={X!r} lambda={lam}")
    return MomentKillResult(U=U, y=y, lambda_vec=lam, eta0=eta0, c1=c1, c2=c2, X=X, l0=float(l0), theta=float(theta),
                            shape=moved, residual=residual, coefficient_bound=coefficient_bound, checks=checks)


def build_cuboid_competitor(theta: float, L: float, kill: MomentKillResult,
                            near_cutoff: int = DEFAULT_NEAR_CUTOFF) -> LatticeConfig:
    """
    Lattice of moment-killed templates in cuboid cells lambda_s lambda_i l0.

    The cells fill the box with sides lambda_i L and lambda_s^3 A* N = theta L^3.

    Raises:
        LdlabError: as build_competitor, and PRECONDITION_VIOLATED if theta
            differs from the density the template was fitted for.
    """
    _check_lattice_preconditions(theta, L)
    if abs(theta - kill.theta) > INVARIANT_TOLERANCE * kill.theta:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED,
                         f"Template was fitted for theta = {kill.theta!r}, not {theta!r}.")
    a_star = theta * kill.l0**3
    K = _cells_per_half_axis(L, kill.l0)
    if K < 0:
        raise LdlabError(ErrorCode.EMPTY_SET, f"No cell of base side {kill.l0!r} fits for L = {L}.")
    cells = lattice_cells(K)
    lam = (theta * L**3 / (a_star * len(cells))) ** (1.0 / 3.0)
    template = TemplateSpec.from_shape(kill.shape.transformed(lam * np.eye(3), np.zeros(3)))
    config = LatticeConfig(theta=float(theta), L=float(L), l0=kill.l0, lambda_scalar=lam, cells=cells,
                           template=template, near_cutoff=near_cutoff, lambda_vec=kill.lambda_vec, a_star=a_star)
    logger.info(f"Built cuboid competitor: theta={theta!r} L={L!r} N={config.N} lambda={lam!r}")
    check_invariants(config)
    return config


def complement_competitor_energy(theta: float, L: float, refs: Optional[ReferenceConstants] = None,
                                 near_cutoff: int = DEFAULT_NEAR_CUTOFF) -> Dict[str, object]:
    """
    Upper bound for theta in (1/2, 1) from the complement of the (1 - theta) competitor.

    Exchanging a set with its complement flips the sign of the signed density,
    so the interaction is unchanged and the perimeter grows by at most the box
    surface 6 L^2.

    Raises:
        LdlabError: PRECONDITION_VIOLATED unless 1/2 < theta < 1.
    """
    ensure(validate_fraction("theta", theta, lower_open=True))
    if not 0.5 < theta < 1.0:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, f"Complement competitor needs 1/2 < theta < 1, got {theta}.")
    config = build_competitor(1.0 - theta, L, refs, near_cutoff)
    energy = decompose_energy(config)
    bound = energy.total + 6.0 * L**2
    return {
        "theta": theta,
        "L": L,
        "complement_energy": energy.to_dict(),
        "upper_bound": bound,
        "per_volume": bound / (theta * L**3),
        "config": config,
    }
