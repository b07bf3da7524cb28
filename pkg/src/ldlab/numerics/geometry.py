"""
Voxel sets on the cube Q_L = [-L/2, L/2]^3 and the geometric quantities the
energy bounds need: volume, face-counting perimeter, diameter, multipole
moments, box localization and the complement.

Cells are addressed as occupancy[i, j, k] with i along x, j along y and k along
z; cell (i, j, k) has center -L/2 + (index + 1/2) h componentwise.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import ensure, validate_fraction, validate_positive

logger = logging.getLogger("ldlab")

# Relative tolerance when matching lengths against the voxel grid.
GRID_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DomainBox:
    """The cube Q_L of side L centered at the origin."""
    L: float

    def __post_init__(self):
        ensure(validate_positive("L", self.L))
        object.__setattr__(self, "L", float(self.L))

    @property
    def volume(self) -> float:
        return self.L**3


@dataclass(frozen=True, eq=False)
class VoxelSet:
    """
    A subset of Q_L given by an n^3 boolean occupancy grid.

    The pitch h = L / n is always derived from the box and n.
    """
    box: DomainBox
    n: int
    occupancy: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise LdlabError(ErrorCode.INVALID_INPUT, f"Voxels per side must be a positive integer, got {self.n}.")
        grid = np.array(self.occupancy, dtype=bool)
        if grid.shape != (self.n, self.n, self.n):
            raise LdlabError(ErrorCode.GRID_MISMATCH,
                             f"Occupancy shape {grid.shape} does not match n = {self.n}.")
        grid.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "occupancy", grid)

    @property
    def L(self) -> float:
        return self.box.L

    @property
    def h(self) -> float:
        return self.box.L / self.n

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    @classmethod
    def empty(cls, L: float, n: int) -> "VoxelSet":
        return cls(DomainBox(L), n, np.zeros((n, n, n), dtype=bool))

    @classmethod
    def full(cls, L: float, n: int) -> "VoxelSet":
        return cls(DomainBox(L), n, np.ones((n, n, n), dtype=bool))

    @classmethod
    def from_indicator(cls, L: float, n: int,
                       indicator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> "VoxelSet":
        """Voxelize a shape by sampling its indicator at the cell centers."""
        c = cell_centers(L, n)
        x, y, z = np.meshgrid(c, c, c, indexing="ij")
        return cls(DomainBox(L), n, np.asarray(indicator(x, y, z), dtype=bool))

    def with_occupancy(self, occupancy: np.ndarray) -> "VoxelSet":
        return VoxelSet(self.box, self.n, occupancy)

    def occupied_centers(self) -> np.ndarray:
        """Centers of the occupied cells as an (m, 3) array."""
        index = np.argwhere(self.occupancy)
        return -0.5 * self.L + (index + 0.5) * self.h

    def same_as(self, other: "VoxelSet") -> bool:
        return (self.n == other.n and self.L == other.L
                and bool(np.array_equal(self.occupancy, other.occupancy)))


@dataclass(frozen=True)
class CuboidSpec:
    """An axis-aligned cuboid with side lengths l and the given center."""
    l: Tuple[float, float, float]
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        sides = tuple(float(v) for v in self.l)
        if len(sides) != 3 or not all(v > 0.0 and math.isfinite(v) for v in sides):
            raise LdlabError(ErrorCode.INVALID_INPUT, f"Cuboid sides must be three positive lengths, got {self.l}.")
        object.__setattr__(self, "l", sides)
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def volume(self) -> float:
        return float(np.prod(self.l))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * np.asarray(self.l)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * np.asarray(self.l)

    @classmethod
    def cube(cls, l: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> "CuboidSpec":
        return cls((l, l, l), tuple(center))


@dataclass(frozen=True)
class MultipoleMoments:
    """Charge q, dipole d and traceless quadrupole P of a signed density."""
    q: float
    d: np.ndarray
    P: np.ndarray

    def __add__(self, other: "MultipoleMoments") -> "MultipoleMoments":
        return MultipoleMoments(self.q + other.q, self.d + other.d, self.P + other.P)

    def __sub__(self, other: "MultipoleMoments") -> "MultipoleMoments":
        return MultipoleMoments(self.q - other.q, self.d - other.d, self.P - other.P)

    def scaled(self, factor: float) -> "MultipoleMoments":
        return MultipoleMoments(factor * self.q, factor * self.d, factor * self.P)

    def is_symmetric(self) -> bool:
        return bool(np.all(self.P == self.P.T))

    def trace_defect(self) -> float:
        """|tr P| relative to the largest entry of P (0 for P = 0)."""
        scale = float(np.max(np.abs(self.P)))
        return 0.0 if scale == 0.0 else abs(float(np.trace(self.P))) / scale

    def to_dict(self) -> dict:
        return {"q": float(self.q), "d": [float(v) for v in self.d], "P": self.P.tolist()}


def cell_centers(L: float, n: int) -> np.ndarray:
    """Cell-center coordinates along one axis."""
    h = L / n
    return -0.5 * L + (np.arange(n) + 0.5) * h


def volume(voxels: VoxelSet) -> float:
    """Volume h^3 times the number of occupied cells."""
    return voxels.h**3 * voxels.count


def filling_fraction(voxels: VoxelSet) -> float:
    """Occupied fraction of the box; the background density for which the set is exactly neutral."""
    return voxels.count / voxels.n**3


def face_counts(voxels: VoxelSet) -> np.ndarray:
    """
    Count faces between an occupied cell and an unoccupied or exterior cell.

    Returns:
        Three counts, one per axis normal.
    """
    padded = np.pad(voxels.occupancy, 1, mode="constant", constant_values=False)
    return np.array([np.count_nonzero(np.diff(padded, axis=a)) for a in range(3)], dtype=np.int64)


def perimeter_by_axis(voxels: VoxelSet) -> np.ndarray:
    """Face-counting perimeter split by the axis of the face normal."""
    return voxels.h**2 * face_counts(voxels).astype(float)


def perimeter(voxels: VoxelSet) -> float:
    """
    Face-counting perimeter h^2 * (number of boundary faces).

    This converges to the l1-anisotropic perimeter, e.g. 6 pi r^2 for a ball.
    """
    return voxels.h**2 * float(face_counts(voxels).sum())


def box_face_count(voxels: VoxelSet) -> int:
    """Number of occupied cell faces lying on the boundary of Q_L."""
    occ = voxels.occupancy
    total = 0
    for axis in range(3):
        total += int(np.count_nonzero(np.take(occ, 0, axis=axis)))
        total += int(np.count_nonzero(np.take(occ, -1, axis=axis)))
    return total


def box_face_area(voxels: VoxelSet) -> float:
    """Area of the part of the box boundary adjacent to occupied cells."""
    return voxels.h**2 * box_face_count(voxels)


def diameter(voxels: VoxelSet) -> float:
    """
    Outer bound on the diameter: largest center distance plus the cell diagonal.

    Raises:
        LdlabError: EMPTY_SET for an empty set.
    """
    points = voxels.occupied_centers()
    if len(points) == 0:
        raise LdlabError(ErrorCode.EMPTY_SET, "Diameter of an empty set is undefined.")
    if len(points) > 1:
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            logger.debug(f"Degenerate hull for {len(points)} cell centers, using all points")
    largest = float(pdist(points).max()) if len(points) > 1 else 0.0
    return largest + math.sqrt(3.0) * voxels.h


def cuboid_moments(cuboid: CuboidSpec, density: float = 1.0) -> MultipoleMoments:
    """Closed-form moments of a uniformly charged cuboid."""
    V = density * cuboid.volume
    c = np.asarray(cuboid.center, dtype=float)
    l2 = np.asarray(cuboid.l, dtype=float) ** 2 / 12.0
    P = V * (3.0 * np.outer(c, c) - np.dot(c, c) * np.eye(3)) + V * np.diag(3.0 * l2 - l2.sum())
    return MultipoleMoments(V, V * c, P)


def _voxel_moments(voxels: VoxelSet) -> MultipoleMoments:
    # A cube has vanishing quadrupole about its own center, so the midpoint rule is exact.
    centers = voxels.occupied_centers()
    w = voxels.h**3
    q = w * len(centers)
    d = w * centers.sum(axis=0)
    second = w * centers.T @ centers
    P = 3.0 * second - np.trace(second) * np.eye(3)
    P = 0.5 * (P + P.T)
    return MultipoleMoments(q, d, P)


def moments(voxels: VoxelSet, theta: float = 0.0, background: Optional[CuboidSpec] = None) -> MultipoleMoments:
    """
    Moments of the signed density 1_Omega - theta * 1_background.

    Args:
        voxels: The occupied set.
        theta: Background density.
        background: Background cuboid, or None to disable the subtraction.

    Raises:
        LdlabError: CONTAINMENT_FAILURE if an occupied cell leaves the background.
    """
    ensure(validate_fraction("theta", theta))
    result = _voxel_moments(voxels)
    if background is None:
        return result
    if voxels.count:
        index = np.argwhere(voxels.occupancy)
        lo = -0.5 * voxels.L + index.min(axis=0) * voxels.h
        hi = -0.5 * voxels.L + (index.max(axis=0) + 1) * voxels.h
        slack = GRID_TOLERANCE * voxels.L
        if np.any(lo < background.lower - slack) or np.any(hi > background.upper + slack):
            raise LdlabError(ErrorCode.CONTAINMENT_FAILURE, "Occupied cells extend beyond the background cuboid.")
    return result - cuboid_moments(background, theta)


def grid_multiple(voxels: VoxelSet, R: float) -> int:
    """
    Return k with R = k h.

    Raises:
        LdlabError: GRID_MISMATCH if R is not a positive multiple of h.
    """
    ratio = R / voxels.h
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > GRID_TOLERANCE * max(1.0, ratio):
        raise LdlabError(ErrorCode.GRID_MISMATCH, f"R = {R} is not a positive multiple of h = {voxels.h}.")
    return k


def quantize_shift(mu: Sequence[float], k: int) -> Tuple[int, int, int]:
    """
    Convert a shift mu in [-1/2, 1/2)^3 to integer cell offsets s = k mu.

    Raises:
        LdlabError: GRID_MISMATCH if mu is off the 1/k grid, INVALID_INPUT if out of range.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (3,) or np.any(mu < -0.5) or np.any(mu >= 0.5):
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Shift must lie in [-1/2, 1/2)^3, got {mu.tolist()}.")
    scaled = mu * k
    offsets = np.round(scaled)
    if np.any(np.abs(scaled - offsets) > GRID_TOLERANCE * k):
        raise LdlabError(ErrorCode.GRID_MISMATCH, f"Shift {mu.tolist()} is not on the 1/{k} grid.")
    return tuple(int(v) for v in offsets)


def shift_offsets(k: int) -> range:
    """Integer offsets s with s / k in [-1/2, 1/2)."""
    return range(-(k // 2), k - k // 2)


def block_indices(n: int, k: int, offset: int) -> np.ndarray:
    """Box index floor((i - offset) / k) of every cell index i along one axis."""
    return np.floor_divide(np.arange(n) - offset, k)


def localize(voxels: VoxelSet, R: float, mu: Sequence[float]) -> List[VoxelSet]:
    """
    Split a set into its intersections with the boxes Q_R(m + mu).

    Boxes are anchored at the lower corner of Q_L: box m covers
    [R (m + mu), R (m + mu + 1)) in coordinates measured from -L/2.

    Returns:
        Nonempty pieces, ordered by box index.

    Raises:
        LdlabError: GRID_MISMATCH if R or mu is off the grid.
    """
    k = grid_multiple(voxels, R)
    offsets = quantize_shift(mu, k)
    labels = [block_indices(voxels.n, k, s) for s in offsets]
    bx, by, bz = np.meshgrid(*labels, indexing="ij")
    pieces = []
    occupied = voxels.occupancy
    for key in sorted(set(zip(bx[occupied].tolist(), by[occupied].tolist(), bz[occupied].tolist()))):
        mask = occupied & (bx == key[0]) & (by == key[1]) & (bz == key[2])
        pieces.append(voxels.with_occupancy(mask))
    logger.debug(f"localize: k={k} offsets={offsets} pieces={len(pieces)}")
    return pieces


def adjacent_pair_positions(voxels: VoxelSet, axis: int) -> np.ndarray:
    """Lower cell index (along axis) of every occupied pair of neighbors along axis."""
    occ = voxels.occupancy
    lower = np.take(occ, range(voxels.n - 1), axis=axis)
    upper = np.take(occ, range(1, voxels.n), axis=axis)
    index = np.argwhere(lower & upper)
    return index[:, axis]


def cut_pair_counts(voxels: VoxelSet, k: int) -> np.ndarray:
    """
    Number of occupied neighbor pairs separated by a cut plane, per axis and offset.

    Returns:
        A (3, k) integer array; column j corresponds to offset shift_offsets(k)[j].
    """
    counts = np.zeros((3, k), dtype=np.int64)
    for axis in range(3):
        # The pair (i, i + 1) is cut by offset s iff i + 1 - s is divisible by k.
        residues = np.mod(adjacent_pair_positions(voxels, axis) + 1, k)
        histogram = np.bincount(residues, minlength=k)
        for j, s in enumerate(shift_offsets(k)):
            counts[axis, j] = histogram[s % k]
    return counts


def piece_perimeter_sum(voxels: VoxelSet, R: float, mu: Sequence[float]) -> float:
    """Sum of the perimeters of localize(voxels, R, mu), from the cut-pair count."""
    k = grid_multiple(voxels, R)
    offsets = quantize_shift(mu, k)
    counts = cut_pair_counts(voxels, k)
    first = -(k // 2)
    cut = sum(int(counts[axis, s - first]) for axis, s in enumerate(offsets))
    return perimeter(voxels) + 2.0 * voxels.h**2 * cut


def average_piece_perimeter(voxels: VoxelSet, R: float) -> float:
    """
    Average of piece_perimeter_sum over all k^3 grid shifts.

    Every occupied neighbor pair is cut by exactly one of the k offsets along
    its axis, so the average is Per + 2 h^2 (pairs) / k.
    """
    k = grid_multiple(voxels, R)
    pairs = sum(len(adjacent_pair_positions(voxels, axis)) for axis in range(3))
    return perimeter(voxels) + 2.0 * voxels.h**2 * pairs / k


def complement_in_box(voxels: VoxelSet) -> VoxelSet:
    """Flip the occupancy inside the box."""
    return voxels.with_occupancy(~voxels.occupancy)


def cube_symmetries() -> Iterator[Tuple[Tuple[int, int, int], Tuple[bool, bool, bool]]]:
    """The 48 symmetries of the cube as (axis permutation, axis flips)."""
    for permutation in itertools.permutations(range(3)):
        for flips in itertools.product((False, True), repeat=3):
            yield permutation, flips


def apply_cube_symmetry(voxels: VoxelSet, permutation: Sequence[int], flips: Sequence[bool]) -> VoxelSet:
    grid = np.transpose(voxels.occupancy, permutation)
    axes = tuple(a for a in range(3) if flips[a])
    if axes:
        grid = np.flip(grid, axis=axes)
    return voxels.with_occupancy(grid)


def voxelize_ball(L: float, n: int, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> VoxelSet:
    cx, cy, cz = (float(v) for v in center)
    return VoxelSet.from_indicator(
        L, n, lambda x, y, z: (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= radius**2)


def voxelize_ellipsoid(L: float, n: int, semi_axes: Sequence[float],
                       center: Sequence[float] = (0.0, 0.0, 0.0),
                       rotation: Optional[np.ndarray] = None) -> VoxelSet:
    """Cell-center voxelization of the ellipsoid center + rotation diag(semi_axes) B_1."""
    a = np.asarray(semi_axes, dtype=float)
    rot = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    c = np.asarray(center, dtype=float)

    def indicator(x, y, z):
        local = np.stack([x - c[0], y - c[1], z - c[2]], axis=-1) @ rot
        return np.sum((local / a) ** 2, axis=-1) <= 1.0

    return VoxelSet.from_indicator(L, n, indicator)


def random_neutral_set(L: float, n: int, theta: float, seed: int, smoothing: float = 1.5) -> VoxelSet:
    """
    A random set with exactly round(theta n^3) occupied cells.

    A Gaussian-smoothed white-noise field is thresholded at the matching rank,
    which gives blob-like sets; smoothing = 0 picks the cells independently.
    """
    ensure(validate_fraction("theta", theta))
    rng = np.random.default_rng(seed)
    field_values = rng.standard_normal((n, n, n))
    if smoothing > 0.0:
        field_values = ndimage.gaussian_filter(field_values, sigma=smoothing, mode="wrap")
    target = int(round(theta * n**3))
    order = np.argsort(field_values, axis=None, kind="stable")[::-1]
    occupancy = np.zeros(n**3, dtype=bool)
    occupancy[order[:target]] = True
    return VoxelSet(DomainBox(L), n, occupancy.reshape(n, n, n))


def write_vox(voxels: VoxelSet, path: Union[str, Path]) -> None:
    """
    Write a set as '.vox': a text header 'L n' and the packed occupancy bits.

    Bits run x fastest, eight per byte, least significant bit first.
    """
    bits = np.packbits(voxels.occupancy.ravel(order="F"), bitorder="little")
    with open(path, "wb") as handle:
        handle.write(f"{voxels.L!r} {voxels.n}\n".encode("ascii"))
        handle.write(bits.tobytes())


def read_vox(path: Union[str, Path]) -> VoxelSet:
    """
    Read a '.vox' file written by write_vox.

    Raises:
        LdlabError: INVALID_INPUT on a malformed header or truncated payload.
    """
    data = Path(path).read_bytes()
    header, sep, payload = data.partition(b"\n")
    try:
        L_text, n_text = header.decode("ascii").split()
        L, n = float(L_text), int(n_text)
    except ValueError:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Malformed .vox header in {path}.")
    expected = (n**3 + 7) // 8
    if not sep or len(payload) != expected:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Expected {expected} payload bytes in {path}, found {len(payload)}.")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=n**3, bitorder="little")
    return VoxelSet(DomainBox(L), n, bits.astype(bool).reshape((n, n, n), order="F"))


@dataclass(frozen=True, eq=False)
class ShapeSample:
    """
    Weighted quadrature points representing a solid shape.

    Exactly one of `frame` (ellipsoid c + F B_1) or `corners` (points whose convex
    hull contains the shape) describes the outline for extent and diameter.
    """
    points: np.ndarray
    weights: np.ndarray
    frame: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    corners: Optional[np.ndarray] = field(default=None)

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def moments(self) -> MultipoleMoments:
        w = self.weights
        x = self.points
        second = (x * w[:, None]).T @ x
        P = 3.0 * second - np.trace(second) * np.eye(3)
        return MultipoleMoments(float(w.sum()), w @ x, 0.5 * (P + P.T))

    def transformed(self, matrix: np.ndarray, shift: Sequence[float]) -> "ShapeSample":
        """Image under x -> matrix x + shift."""
        A = np.asarray(matrix, dtype=float)
        b = np.asarray(shift, dtype=float)
        jacobian = abs(float(np.linalg.det(A)))
        return ShapeSample(
            points=self.points @ A.T + b,
            weights=self.weights * jacobian,
            frame=None if self.frame is None else A @ self.frame,
            center=None if self.center is None else A @ self.center + b,
            corners=None if self.corners is None else self.corners @ A.T + b,
        )

    def translated(self, shift: Sequence[float]) -> "ShapeSample":
        return self.transformed(np.eye(3), shift)

    def extent(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (lower, upper) of the shape."""
        if self.frame is not None:
            half = np.sqrt(np.sum(self.frame**2, axis=1))
            return self.center - half, self.center + half
        return self.corners.min(axis=0), self.corners.max(axis=0)

    def diameter(self) -> float:
        if self.frame is not None:
            return 2.0 * float(np.linalg.svd(self.frame, compute_uv=False).max())
        points = self.corners
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            pass
        return float(pdist(points).max())

    @classmethod
    def ellipsoid(cls, semi_axes: Sequence[float], center: Sequence[float] = (0.0, 0.0, 0.0),
                  rotation: Optional[np.ndarray] = None, order: int = 16) -> "ShapeSample":
        """
        Gauss-Legendre rule on the ellipsoid in spherical coordinates.

        Polynomials up to degree 2 * order - 1 in each variable integrate exactly.
        """
        a = np.asarray(semi_axes, dtype=float)
        rot = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        c = np.asarray(center, dtype=float)
        x, w = leggauss(order)
        r, wr = 0.5 * (x + 1.0), 0.5 * w
        cos_t, wt = x, w
        phi = 2.0 * np.pi * np.arange(2 * order) / (2 * order)
        wp = np.full(2 * order, 2.0 * np.pi / (2 * order))
        R, C, F = np.meshgrid(r, cos_t, phi, indexing="ij")
        S = np.sqrt(1.0 - C**2)
        unit = np.stack([R * S * np.cos(F), R * S * np.sin(F), R * C], axis=-1).reshape(-1, 3)
        weights = np.einsum("i,j,k->ijk", wr * r**2, wt, wp).ravel() * float(np.prod(a))
        frame = rot @ np.diag(a)
        return cls(points=unit @ frame.T + c, weights=weights, frame=frame, center=c)

    @classmethod
    def ball(cls, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0), order: int = 16) -> "ShapeSample":
        return cls.ellipsoid((radius, radius, radius), center, order=order)

    @classmethod
    def cuboid(cls, cuboid: CuboidSpec, order: int = 4) -> "ShapeSample":
        x, w = leggauss(order)
        axes = [cuboid.center[i] + 0.5 * cuboid.l[i] * x for i in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        weights = np.einsum("i,j,k->ijk", w, w, w).ravel() * cuboid.volume / 8.0
        corners = np.array([[cuboid.lower[i] if s == 0 else cuboid.upper[i] for i, s in enumerate(signs)]
                            for signs in itertools.product((0, 1), repeat=3)])
        return cls(points=grid, weights=weights, corners=corners)

    @classmethod
    def from_voxels(cls, voxels: VoxelSet) -> "ShapeSample":
        """
        Two Gauss points per axis and cell, so moments up to the quadrupole stay
        exact under any affine map.

        Raises:
            LdlabError: EMPTY_SET for an empty set.
        """
        centers = voxels.occupied_centers()
        if len(centers) == 0:
            raise LdlabError(ErrorCode.EMPTY_SET, "Cannot sample an empty voxel set.")
        h = voxels.h
        g = 0.5 * h / math.sqrt(3.0)
        offsets = np.array(list(itertools.product((-g, g), repeat=3)))
        points = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
        weights = np.full(len(points), h**3 / 8.0)
        cube = np.array(list(itertools.product((-0.5 * h, 0.5 * h), repeat=3)))
        hull_centers = centers
        if len(centers) > 4:
            try:
                hull_centers = centers[ConvexHull(centers).vertices]
            except QhullError:
                pass
        corners = (hull_centers[:, None, :] + cube[None, :, :]).reshape(-1, 3)
        return cls(points=points, weights=weights, corners=corners)
