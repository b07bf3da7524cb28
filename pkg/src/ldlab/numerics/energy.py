"""
Energy functionals on voxel sets: whole space, boxed with a neutralizing
background, anisotropically rescaled, and the boundary-condition family, plus
the ball-ansatz reference constants.

Interactions are double sums over cell pairs. A pair of cells only enters
through its integer displacement d, so the signed density is reduced to its
autocorrelation C(d) and paired with a cached cell kernel K(d):

    interaction = 1/2 sum_d C(d) K(d)

The "cell" kernel K(d) is the exact double integral of the kernel over two
cells for |d|_inf <= 2 (including the singular self cell) and the midpoint
value beyond. The "lattice" kernel is 4 pi h^5 g(d) with the Green's function
g of the 7-point Laplacian; it is the kernel the free-space Poisson closure
realizes, so the double sum and the free-space solve agree to solver accuracy.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from ldlab.numerics.fields_bc import (
    BoundaryCondition, check_neutrality, gradient_energy, lattice_green_function, potential,
)
from ldlab.numerics.geometry import DomainBox, VoxelSet, perimeter, perimeter_by_axis
from ldlab.numerics.kernels import correlation_kernel
from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import ensure, validate_fraction, validate_positive

logger = logging.getLogger("ldlab")

# Displacements with |d|_inf up to this value use the exact cell-pair integral.
NEAR_CLASS_RADIUS = 2
DETERMINANT_TOLERANCE = 1e-12
CORRELATION_METHODS = ("fft", "direct")
# "free_space" evaluates the lattice-kernel interaction through the free-space Poisson solve.
METHODS = CORRELATION_METHODS + ("free_space",)
KERNELS = ("cell", "lattice")
ORDERING_TOLERANCE = 1e-8
RESCALING_TOLERANCE = 1e-6

# (lower, upper) pairs with E_lower <= E_upper for every neutral set.
BC_ORDERINGS: Tuple[Tuple[BoundaryCondition, BoundaryCondition], ...] = (
    (BoundaryCondition.DIRICHLET, BoundaryCondition.PERIODIC),
    (BoundaryCondition.DIRICHLET, BoundaryCondition.FREE_SPACE),
    (BoundaryCondition.PERIODIC, BoundaryCondition.NEUMANN),
    (BoundaryCondition.FREE_SPACE, BoundaryCondition.NEUMANN),
)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Perimeter plus interaction; parts optionally splits the interaction into (self, near, far)."""
    perimeter: float
    interaction: float
    parts: Optional[Tuple[float, float, float]] = None

    @property
    def total(self) -> float:
        return self.perimeter + self.interaction

    def to_dict(self) -> Dict[str, object]:
        result = {"perimeter": self.perimeter, "interaction": self.interaction, "total": self.total}
        if self.parts is not None:
            result["parts"] = {"self": self.parts[0], "near": self.parts[1], "far": self.parts[2]}
        return result


@dataclass(frozen=True)
class ReferenceConstants:
    """Optimal radius, mass and energy per volume of the reference droplet."""
    rStar: float
    aStar: float
    eStar: float
    label: str = field(default="ball ansatz")

    @classmethod
    def ball_ansatz(cls) -> "ReferenceConstants":
        r = (15.0 / (8.0 * math.pi)) ** (1.0 / 3.0)
        return cls(rStar=r, aStar=4.0 * math.pi / 3.0 * r**3, eStar=4.5 / r)

    def with_e_star(self, e_star: float) -> "ReferenceConstants":
        ensure(validate_positive("e_star", e_star))
        return ReferenceConstants(self.rStar, self.aStar, float(e_star), label="configured")

    def to_dict(self) -> Dict[str, object]:
        return {"rStar": self.rStar, "aStar": self.aStar, "eStar": self.eStar, "label": self.label}


def ball_energy_analytic(r: float) -> EnergyBreakdown:
    """Perimeter 4 pi r^2 and Coulomb self energy (16 pi^2 / 15) r^5 of a ball."""
    ensure(validate_positive("r", r))
    return EnergyBreakdown(4.0 * math.pi * r**2, 16.0 * math.pi**2 / 15.0 * r**5)


def ball_energy_per_volume(r: float) -> float:
    """e(r) = 3 / r + (4 pi / 5) r^2."""
    ensure(validate_positive("r", r))
    return 3.0 / r + 0.8 * math.pi * r**2


@functools.lru_cache(maxsize=64)
def _cell_kernel_table(n: int, h: float, anisotropy: Tuple[float, float, float],
                       screening: float) -> np.ndarray:
    offsets = np.arange(-(n - 1), n, dtype=float)
    dx, dy, dz = np.meshgrid(offsets * anisotropy[0], offsets * anisotropy[1], offsets * anisotropy[2],
                             indexing="ij")
    distance = np.sqrt(dx**2 + dy**2 + dz**2)
    with np.errstate(divide="ignore"):
        table = h**5 / distance
    if screening:
        table = table * np.exp(-screening * h * distance)
    center = n - 1
    radius = min(NEAR_CLASS_RADIUS, n - 1)
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            for c in range(-radius, radius + 1):
                W = correlation_kernel((abs(a), abs(b), abs(c)), anisotropy, screening * h)
                table[center + a, center + b, center + c] = h**5 * W
    table.setflags(write=False)
    logger.debug(f"cell kernel table n={n} h={h!r} anisotropy={anisotropy} screening={screening!r}")
    return table


def cell_kernel_table(n: int, h: float, anisotropy: Sequence[float] = (1.0, 1.0, 1.0),
                      screening: float = 0.0) -> np.ndarray:
    """
    Cell-pair kernel K(d) for displacements -(n-1) <= d_i <= n-1.

    Args:
        n: Cells per side.
        h: Cell pitch before the anisotropic scaling.
        anisotropy: Axis scaling lambda (cells become h lambda_1 x h lambda_2 x h lambda_3).
        screening: Yukawa mass; 0 for Coulomb.

    Returns:
        Read-only (2n-1)^3 array with K(0) at index (n-1, n-1, n-1).
    """
    return _cell_kernel_table(int(n), float(h), tuple(float(v) for v in anisotropy), float(screening))


def lattice_kernel_table(n: int, h: float) -> np.ndarray:
    """Lattice Coulomb kernel 4 pi h^5 g(d) on the same displacement layout as cell_kernel_table."""
    g = lattice_green_function(n - 1)
    index = np.abs(np.arange(-(n - 1), n))
    return 4.0 * math.pi * h**5 * g[np.ix_(index, index, index)]


def autocorrelation(f: np.ndarray, method: str = "fft") -> np.ndarray:
    """
    C(d) = sum_i f_i f_{i+d} for all displacements, as a (2n-1)^3 array.

    "fft" uses a zero-padded FFT convolution; "direct" sums the overlapping
    slices class by class.
    """
    if method == "fft":
        return fftconvolve(f, f[::-1, ::-1, ::-1], mode="full")
    if method != "direct":
        raise LdlabError(ErrorCode.INVALID_INPUT,
                         f"Unknown method {method!r}; expected one of {CORRELATION_METHODS}.")
    n = f.shape[0]
    result = np.zeros((2 * n - 1,) * 3)

    def window(shift: int) -> Tuple[slice, slice]:
        return (slice(0, n - shift), slice(shift, n)) if shift >= 0 else (slice(-shift, n), slice(0, n + shift))

    for a in range(-(n - 1), n):
        ax, bx = window(a)
        for b in range(-(n - 1), n):
            ay, by = window(b)
            for c in range(-(n - 1), n):
                az, bz = window(c)
                result[n - 1 - a, n - 1 - b, n - 1 - c] = float(np.sum(f[ax, ay, az] * f[bx, by, bz]))
    return result


def _split_interaction(correlation: np.ndarray, table: np.ndarray) -> Tuple[float, float, float]:
    n = (correlation.shape[0] + 1) // 2
    products = 0.5 * correlation * table
    center = n - 1
    offsets = np.abs(np.arange(-(n - 1), n))
    chebyshev = np.maximum.reduce(np.meshgrid(offsets, offsets, offsets, indexing="ij"))
    self_part = float(products[center, center, center])
    near = float(np.sum(products[(chebyshev >= 1) & (chebyshev <= NEAR_CLASS_RADIUS)]))
    far = float(np.sum(products[chebyshev > NEAR_CLASS_RADIUS]))
    return self_part, near, far


def _signed_density(voxels: VoxelSet, theta: float) -> np.ndarray:
    return voxels.occupancy.astype(float) - theta


def anisotropic_energy(voxels: VoxelSet, theta: float, lam: Sequence[float],
                       method: str = "fft") -> EnergyBreakdown:
    """
    Energy of the rescaled set lambda Omega in the cuboid lambda Q_L.

    The set is given on the reference grid of Q_L; cells map to cuboids of
    sides h lambda_i, faces normal to axis a scale by 1 / lambda_a.

    Raises:
        LdlabError: DETERMINANT_CONSTRAINT if lambda_1 lambda_2 lambda_3 != 1.
    """
    ensure(validate_fraction("theta", theta))
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3,) or np.any(lam <= 0.0):
        raise LdlabError(ErrorCode.INVALID_INPUT, f"lambda must be three positive numbers, got {lam.tolist()}.")
    if abs(float(np.prod(lam)) - 1.0) > DETERMINANT_TOLERANCE:
        raise LdlabError(ErrorCode.DETERMINANT_CONSTRAINT, f"lambda product is {np.prod(lam)!r}, expected 1.")
    per = float(np.sum(perimeter_by_axis(voxels) / lam))
    f = _signed_density(voxels, theta)
    table = cell_kernel_table(voxels.n, voxels.h, lam)
    parts = _split_interaction(autocorrelation(f, method), table)
    interaction = math.fsum(parts)
    logger.debug(f"anisotropic_energy n={voxels.n} theta={theta!r} lambda={lam.tolist()}: "
                 f"perimeter={per!r} interaction={interaction!r}")
    return EnergyBreakdown(per, interaction, parts)


def box_energy(voxels: VoxelSet, theta: float, method: str = "fft", kernel: str = "cell") -> EnergyBreakdown:
    """
    Per(Omega) + 1/2 double integral of (1_Omega - theta)(x) (1_Omega - theta)(y) / |x - y| over Q_L.

    Args:
        voxels: The set Omega.
        theta: Background density.
        method: "fft" or "direct" double sum, or "free_space" for the free-space
            Poisson closure (lattice kernel only).
        kernel: "cell" for the cell-averaged Coulomb kernel, "lattice" for the
            discrete Green's function kernel.

    Raises:
        LdlabError: INVALID_INPUT for theta outside [0, 1], an unknown method or
            kernel, or the free-space method with the cell kernel.
    """
    if kernel not in KERNELS:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Unknown kernel {kernel!r}; expected one of {KERNELS}.")
    if method not in METHODS:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Unknown method {method!r}; expected one of {METHODS}.")
    if kernel == "cell":
        if method == "free_space":
            raise LdlabError(ErrorCode.INVALID_INPUT, "The free-space method evaluates the lattice kernel only.")
        return anisotropic_energy(voxels, theta, (1.0, 1.0, 1.0), method)
    ensure(validate_fraction("theta", theta))
    per = perimeter(voxels)
    if method == "free_space":
        v = potential(voxels, theta, BoundaryCondition.FREE_SPACE)
        interaction = 4.0 * math.pi * gradient_energy(v, BoundaryCondition.FREE_SPACE)
        return EnergyBreakdown(per, interaction)
    f = _signed_density(voxels, theta)
    parts = _split_interaction(autocorrelation(f, method), lattice_kernel_table(voxels.n, voxels.h))
    return EnergyBreakdown(per, math.fsum(parts), parts)


def whole_space_energy(voxels: VoxelSet, method: str = "fft") -> EnergyBreakdown:
    """
    Per(Omega) + 1/2 double integral of 1/|x - y| over Omega x Omega.

    Raises:
        LdlabError: EMPTY_SET for an empty set.
    """
    if voxels.count == 0:
        raise LdlabError(ErrorCode.EMPTY_SET, "Whole-space energy needs a nonempty set.")
    return box_energy(voxels, 0.0, method)


def yukawa_self_energy(voxels: VoxelSet, omega: float) -> float:
    """1/2 double integral of exp(-omega |x - y|) / |x - y| over Omega x Omega."""
    if not omega > 0.0:
        raise LdlabError(ErrorCode.NONPOSITIVE_RATE, f"Yukawa mass must be positive, got {omega}.")
    f = voxels.occupancy.astype(float)
    table = cell_kernel_table(voxels.n, voxels.h, (1.0, 1.0, 1.0), omega)
    return math.fsum(_split_interaction(autocorrelation(f), table))


def bc_energy(voxels: VoxelSet, theta: float, bc: BoundaryCondition) -> EnergyBreakdown:
    """
    Per(Omega) + gradient energy of the boundary-condition potential.

    Every closure requires | |Omega| - theta L^3 | within one voxel.

    Raises:
        LdlabError: NEUTRALITY_VIOLATION for a non-neutral set.
    """
    ensure(validate_fraction("theta", theta))
    check_neutrality(voxels, theta)
    v = potential(voxels, theta, bc)
    interaction = gradient_energy(v, bc)
    logger.debug(f"bc_energy {bc.value} n={voxels.n} theta={theta!r}: interaction={interaction!r}")
    return EnergyBreakdown(perimeter(voxels), interaction)


def free_space_rescaling(voxels: VoxelSet, theta: float, method: str = "fft") -> Dict[str, float]:
    """
    Both sides of E_{theta,L}[Omega] = (4 pi)^(-2/3) E_{inf,(4 pi)^(1/3) L}[(4 pi)^(1/3) Omega].

    The free-space side is the gradient energy of the free-space potential of
    the scaled set (the Coulomb constant absorbed by the rescaling). It is
    compared with the lattice-kernel box energy, which it matches to solver
    accuracy; "relative_difference" must stay below RESCALING_TOLERANCE.
    "discretization_gap" is the relative distance between the lattice and the
    cell-averaged kernel energies and shrinks under grid refinement.
    """
    scale = (4.0 * math.pi) ** (1.0 / 3.0)
    cell = box_energy(voxels, theta, method).total
    lattice = box_energy(voxels, theta, method, kernel="lattice").total
    scaled = VoxelSet(DomainBox(scale * voxels.L), voxels.n, voxels.occupancy)
    v = potential(scaled, theta, BoundaryCondition.FREE_SPACE)
    free = perimeter(scaled) + gradient_energy(v, BoundaryCondition.FREE_SPACE)
    rescaled = free / scale**2
    tiny = np.finfo(float).tiny
    result = {
        "box_energy": cell,
        "lattice_box_energy": lattice,
        "free_space_energy": free,
        "rescaled_free_space_energy": rescaled,
        "relative_difference": abs(lattice - rescaled) / max(abs(lattice), tiny),
        "discretization_gap": abs(cell - lattice) / max(abs(cell), tiny),
    }
    logger.debug(f"free_space_rescaling n={voxels.n} theta={theta!r}: {result}")
    return result


def boundary_energies(voxels: VoxelSet, theta: float) -> Dict[BoundaryCondition, EnergyBreakdown]:
    """bc_energy under every boundary condition."""
    return {bc: bc_energy(voxels, theta, bc) for bc in BoundaryCondition}


def ordering_margins(energies: Dict[BoundaryCondition, EnergyBreakdown]) -> Dict[str, float]:
    """
    Relative margins (E_upper - E_lower) / max(|E_lower|, |E_upper|) of BC_ORDERINGS.

    A margin below -ORDERING_TOLERANCE is a violated ordering.
    """
    margins = {}
    for lower, upper in BC_ORDERINGS:
        e_lower, e_upper = energies[lower].total, energies[upper].total
        scale = max(abs(e_lower), abs(e_upper), np.finfo(float).tiny)
        margins[f"{lower.value}<={upper.value}"] = (e_upper - e_lower) / scale
    return margins
