"""
Lower bound on the energy per droplet volume.

A certificate (omega, R) combines three estimates with explicit constants:
replacing the Coulomb kernel by the Yukawa kernel of mass omega costs at most
4 pi theta / omega^2 per unit volume, cutting the set into boxes of side R costs
at most 6 / R per unit volume of perimeter, and a piece of diameter at most
sqrt(3) R interacts through the Yukawa kernel at least exp(-sqrt(3) omega R)
times its Coulomb self energy. Hence

    E[Omega] / |Omega| >= exp(-sqrt(3) omega R) e* - 4 pi theta / omega^2 - 6 / R.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ldlab.numerics.energy import box_energy, whole_space_energy, yukawa_self_energy
from ldlab.numerics.fields_bc import check_neutrality
from ldlab.numerics.geometry import (
    VoxelSet, cut_pair_counts, grid_multiple, localize, perimeter, shift_offsets, volume,
)
from ldlab.numerics.kernels import yukawa_space_integral
from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import ensure, loglog_slope, validate_fraction, validate_positive

logger = logging.getLogger("ldlab")

SQRT3 = math.sqrt(3.0)
LOCALIZATION_CONSTANT = 6.0
DESCENT_ITERATIONS = 60
LINE_SEARCH_HALF_WIDTH = 2.5


@dataclass(frozen=True)
class Certificate:
    """Certified lower bound `value` on E[Omega] / |Omega| for a given theta."""
    theta: float
    omega: float
    R: float
    eStar: float
    value: float
    schedule: Optional[Dict[str, float]] = None

    @property
    def deficit(self) -> float:
        return self.eStar - self.value

    def to_dict(self) -> Dict[str, object]:
        result = {
            "theta": self.theta,
            "omega": self.omega,
            "R": self.R,
            "eStar": self.eStar,
            "value": self.value,
        }
        if self.schedule is not None:
            result["schedule"] = dict(self.schedule)
        return result


def _formula(theta: float, omega: float, R: float, e_star: float) -> float:
    return math.exp(-SQRT3 * omega * R) * e_star - theta * yukawa_space_integral(omega) - LOCALIZATION_CONSTANT / R


def certificate_value(theta: float, omega: float, R: float, e_star: float) -> Certificate:
    """
    exp(-sqrt(3) omega R) e* - 4 pi theta / omega^2 - 6 / R.

    Raises:
        LdlabError: INVALID_INPUT for theta outside (0, 1] or a nonpositive parameter.
    """
    ensure(validate_fraction("theta", theta, lower_open=True))
    ensure(validate_positive("omega", omega))
    ensure(validate_positive("R", R))
    ensure(validate_positive("e_star", e_star))
    return Certificate(float(theta), float(omega), float(R), float(e_star), _formula(theta, omega, R, e_star))


def linearized_certificate_value(theta: float, omega: float, R: float, e_star: float) -> float:
    """The certificate with exp(-x) replaced by its lower bound 1 - x."""
    ensure(validate_fraction("theta", theta, lower_open=True))
    return (1.0 - SQRT3 * omega * R) * e_star - 4.0 * math.pi * theta / omega**2 - LOCALIZATION_CONSTANT / R


def linearized_schedule(theta: float, e_star: float) -> Tuple[float, float]:
    """
    Maximizer (omega, R) of the linearized certificate.

    R = sqrt(6 / (sqrt(3) e* omega)) balances the cut cost against the
    Yukawa decay, and omega = (8 pi theta / sqrt(6 sqrt(3) e*))^(2/5).
    """
    ensure(validate_fraction("theta", theta, lower_open=True))
    ensure(validate_positive("e_star", e_star))
    omega = (8.0 * math.pi * theta / math.sqrt(6.0 * SQRT3 * e_star)) ** 0.4
    R = math.sqrt(LOCALIZATION_CONSTANT / (SQRT3 * e_star * omega))
    return omega, R


def optimize_certificate(theta: float, e_star: float) -> Certificate:
    """
    Start from omega = theta^(2/5), R = theta^(-1/5) and refine by coordinate
    descent in (log omega, log R) on the exact formula.

    Each line search is a bounded Brent search over +-2.5 in the log
    variable; a step is kept only if it improves the value, so the result is
    never below the starting schedule.
    """
    start = certificate_value(theta, theta**0.4, theta**-0.2, e_star)
    x = np.array([math.log(start.omega), math.log(start.R)])
    best = start.value

    def objective(point: np.ndarray) -> float:
        return -_formula(theta, math.exp(point[0]), math.exp(point[1]), e_star)

    for iteration in range(DESCENT_ITERATIONS):
        improved = False
        for axis in range(2):
            def line(t: float, axis: int = axis) -> float:
                trial = x.copy()
                trial[axis] = t
                return objective(trial)

            result = optimize.minimize_scalar(
                line, bounds=(x[axis] - LINE_SEARCH_HALF_WIDTH, x[axis] + LINE_SEARCH_HALF_WIDTH),
                method="bounded", options={"xatol": 1e-12})
            if -result.fun > best:
                if -result.fun - best > 1e-15 * abs(best):
                    improved = True
                x[axis] = result.x
                best = -result.fun
        if not improved:
            logger.debug(f"optimize_certificate: converged after {iteration + 1} sweeps")
            break

    refined = certificate_value(theta, math.exp(x[0]), math.exp(x[1]), e_star)
    # deficit_constant is C in e* - value = C theta^(1/5).
    schedule = {"omega0": start.omega, "R0": start.R, "value0": start.value,
                "deficit_constant": refined.deficit / theta**0.2}
    logger.info(f"Certificate theta={theta!r}: value={refined.value!r} (schedule {start.value!r})")
    return Certificate(refined.theta, refined.omega, refined.R, refined.eStar, refined.value, schedule)


def yukawa_interaction_bound(voxels: VoxelSet, theta: float, omega: float) -> Tuple[float, float]:
    """
    Yukawa self energy of the set and the slack of the Coulomb-to-Yukawa comparison.

    The signed Coulomb interaction is at least yukawaSelf - slack with
    slack = 8 pi theta |Omega| / omega^2.

    Returns:
        (yukawaSelf, slack)

    Raises:
        LdlabError: NONPOSITIVE_RATE for omega <= 0.
    """
    ensure(validate_fraction("theta", theta))
    yukawa_self = yukawa_self_energy(voxels, omega)
    slack = 2.0 * theta * volume(voxels) * yukawa_space_integral(omega)
    return yukawa_self, slack


def yukawa_margin(voxels: VoxelSet, theta: float, omega: float) -> Dict[str, float]:
    """Both sides of the Coulomb-to-Yukawa comparison and their relative margin."""
    yukawa_self, slack = yukawa_interaction_bound(voxels, theta, omega)
    coulomb = box_energy(voxels, theta).interaction
    bound = yukawa_self - slack
    scale = max(abs(coulomb), abs(yukawa_self), np.finfo(float).tiny)
    return {
        "coulomb": coulomb,
        "yukawa_self": yukawa_self,
        "slack": slack,
        "margin": coulomb - bound,
        "relative_margin": (coulomb - bound) / scale,
    }


def localization_shift(voxels: VoxelSet, R: float) -> Tuple[Tuple[float, float, float], float]:
    """
    Grid shift minimizing the summed perimeter of the localized pieces.

    Cuts along different axes are independent, so each axis picks the offset
    with the fewest cut neighbor pairs; ties go to the smallest offset.

    Returns:
        (mu0, pieceSum) with mu0 in [-1/2, 1/2)^3.

    Raises:
        LdlabError: GRID_MISMATCH if R is not a multiple of h.
    """
    k = grid_multiple(voxels, R)
    counts = cut_pair_counts(voxels, k)
    offsets = list(shift_offsets(k))
    best = np.argmin(counts, axis=1)
    mu0 = tuple(offsets[int(j)] / k for j in best)
    cut = int(sum(counts[axis, j] for axis, j in enumerate(best)))
    piece_sum = perimeter(voxels) + 2.0 * voxels.h**2 * cut
    logger.debug(f"localization_shift k={k}: mu0={mu0} cut pairs={cut}")
    return mu0, piece_sum


def localization_bound(voxels: VoxelSet, R: float) -> float:
    """Per(Omega) + 6 |Omega| / R."""
    return perimeter(voxels) + LOCALIZATION_CONSTANT * volume(voxels) / R


def piece_energy_ratios(voxels: VoxelSet, R: float) -> List[float]:
    """Whole-space energy per volume of every piece of the best localization."""
    mu0, _ = localization_shift(voxels, R)
    ratios = []
    for piece in localize(voxels, R, mu0):
        ratios.append(whole_space_energy(piece).total / volume(piece))
    return ratios


def lower_bound_check(voxels: VoxelSet, theta: float, cert: Certificate) -> Dict[str, object]:
    """
    Compare E[Omega] / |Omega| of a neutral set with a certificate.

    The face-counting perimeter exceeds the Euclidean one, which only makes
    the comparison more conservative.

    Raises:
        LdlabError: NEUTRALITY_VIOLATION for a non-neutral set, EMPTY_SET for an empty one.
    """
    if voxels.count == 0:
        raise LdlabError(ErrorCode.EMPTY_SET, "The lower bound is per droplet volume; the set is empty.")
    check_neutrality(voxels, theta)
    energy = box_energy(voxels, theta)
    per_volume = energy.total / volume(voxels)
    margin = per_volume - cert.value
    report = {
        "theta": theta,
        "energy": energy.to_dict(),
        "energy_per_volume": per_volume,
        "certificate": cert.to_dict(),
        "margin": margin,
        "passed": margin >= 0.0,
    }
    if margin < 0.0:
        logger.warning(f"lower_bound_check: energy per volume {per_volume!r} below certificate {cert.value!r}")
    return report


def deficit_rate(thetas: Sequence[float], e_star: float) -> Dict[str, object]:
    """Optimized certificates over a theta grid and the log-log slope of their deficits."""
    certificates = [optimize_certificate(theta, e_star) for theta in thetas]
    deficits = [cert.deficit for cert in certificates]
    return {
        "certificates": certificates,
        "deficits": deficits,
        "slope": loglog_slope(list(thetas), deficits),
    }
