"""
Discrete Poisson problems -Lap v = 1_Omega - theta on Q_L.

All four boundary conditions use the cell-centered 7-point Laplacian. The
bounded problems close it with ghost cells (negated for Dirichlet, mirrored for
Neumann, wrapped for periodic) and are diagonalized by DST-II, DCT-II and FFT.
The free-space problem convolves with the lattice Green's function of the same
operator on Z^3, so every energy below is the exact energy of one discrete
operator and the boundary-condition orderings hold without discretization slack.
"""

import functools
import logging
import math
from enum import Enum
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy import fft, special
from scipy.signal import fftconvolve

from ldlab.numerics.geometry import DomainBox, VoxelSet, cell_centers, volume
from ldlab.numerics.kernels import cube_face_integral
from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import ensure, validate_fraction

logger = logging.getLogger("ldlab")

RESIDUAL_TOLERANCE = 1e-10
MIN_GRID = 4

# Heat-kernel quadrature for the lattice Green's function: trapezoid in s = ln t.
GREEN_LOG_T_MIN = -35.0
GREEN_T_MAX = 1e8
GREEN_LOG_STEP = 0.1


class BoundaryCondition(str, Enum):
    """Closure of the Poisson problem on Q_L."""
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"
    FREE_SPACE = "free_space"

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        key = str(text).strip().lower().replace("-", "_")
        aliases = {"d": cls.DIRICHLET, "n": cls.NEUMANN, "p": cls.PERIODIC, "inf": cls.FREE_SPACE,
                   "infinity": cls.FREE_SPACE, "free": cls.FREE_SPACE}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise LdlabError(ErrorCode.INVALID_INPUT, f"Unknown boundary condition {text!r}.")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Cell-centered samples on Q_L, optionally on an enlarged grid.

    With padding p the values cover (n + 2p)^3 cells, the box occupying the
    central n^3 block. For free-space potentials the outermost layer holds
    exterior values that only enter the boundary term of the gradient energy.
    """
    box: DomainBox
    n: int
    values: np.ndarray
    padding: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        size = self.n + 2 * self.padding
        if values.shape != (size, size, size):
            raise LdlabError(ErrorCode.GRID_MISMATCH,
                             f"Field shape {values.shape} does not match n = {self.n}, padding = {self.padding}.")
        if not np.all(np.isfinite(values)):
            raise LdlabError(ErrorCode.INVALID_INPUT, "Field values must be finite.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def h(self) -> float:
        return self.box.L / self.n

    @property
    def core(self) -> np.ndarray:
        """Values on the n^3 box cells."""
        p = self.padding
        return self.values[p:p + self.n, p:p + self.n, p:p + self.n]

    @classmethod
    def from_function(cls, L: float, n: int, function) -> "ScalarField":
        c = cell_centers(L, n)
        x, y, z = np.meshgrid(c, c, c, indexing="ij")
        return cls(DomainBox(L), n, function(x, y, z))


def _check_grid(n: int) -> None:
    if n < MIN_GRID:
        raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, f"Grid too coarse: n = {n} < {MIN_GRID}.")


def _ghost_padded(values: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    if bc is BoundaryCondition.PERIODIC:
        return np.pad(values, 1, mode="wrap")
    padded = np.pad(values, 1, mode="symmetric")
    if bc is BoundaryCondition.DIRICHLET:
        padded[0, :, :] *= -1.0
        padded[-1, :, :] *= -1.0
        padded[:, 0, :] *= -1.0
        padded[:, -1, :] *= -1.0
        padded[:, :, 0] *= -1.0
        padded[:, :, -1] *= -1.0
    return padded


def _negative_laplacian_of_padded(padded: np.ndarray, h: float) -> np.ndarray:
    inner = padded[1:-1, 1:-1, 1:-1]
    total = 6.0 * inner
    total -= padded[:-2, 1:-1, 1:-1] + padded[2:, 1:-1, 1:-1]
    total -= padded[1:-1, :-2, 1:-1] + padded[1:-1, 2:, 1:-1]
    total -= padded[1:-1, 1:-1, :-2] + padded[1:-1, 1:-1, 2:]
    return total / h**2


def negative_laplacian(field: ScalarField, bc: BoundaryCondition) -> np.ndarray:
    """
    Apply -Lap_h with the closure of bc.

    For free-space fields the result covers the enlarged grid without its
    exterior layer.
    """
    if bc is BoundaryCondition.FREE_SPACE:
        if field.padding < 1:
            raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, "Free-space field needs an exterior layer.")
        return _negative_laplacian_of_padded(field.values, field.h)
    return _negative_laplacian_of_padded(_ghost_padded(field.values, bc), field.h)


def _eigenvalues(n: int, h: float, bc: BoundaryCondition) -> np.ndarray:
    k = np.arange(n)
    if bc is BoundaryCondition.DIRICHLET:
        return 4.0 * np.sin(np.pi * (k + 1) / (2 * n)) ** 2 / h**2
    if bc is BoundaryCondition.NEUMANN:
        return 4.0 * np.sin(np.pi * k / (2 * n)) ** 2 / h**2
    return 4.0 * np.sin(np.pi * k / n) ** 2 / h**2


def _spectral_solve(rhs: np.ndarray, h: float, bc: BoundaryCondition) -> np.ndarray:
    n = rhs.shape[0]
    lam = _eigenvalues(n, h, bc)
    total = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
    if bc is BoundaryCondition.DIRICHLET:
        coefficients = fft.dstn(rhs, type=2, norm="ortho") / total
        return fft.idstn(coefficients, type=2, norm="ortho")
    total[0, 0, 0] = 1.0
    if bc is BoundaryCondition.NEUMANN:
        coefficients = fft.dctn(rhs, type=2, norm="ortho") / total
        coefficients[0, 0, 0] = 0.0
        return fft.idctn(coefficients, type=2, norm="ortho")
    coefficients = fft.fftn(rhs) / total
    coefficients[0, 0, 0] = 0.0
    return np.real(fft.ifftn(coefficients))


def _heat_kernel_tail(r2: np.ndarray, t_max: float) -> np.ndarray:
    """Integral over t > t_max of (4 pi t)^(-3/2) exp(-r^2 / 4t) (1 + 3 / 16t)."""
    x = r2 / (4.0 * t_max)
    quarter = np.where(r2 > 0.0, r2 / 4.0, 1.0)
    first = np.where(r2 > 0.0, special.gammainc(0.5, x) * special.gamma(0.5) / np.sqrt(quarter),
                     2.0 / math.sqrt(t_max))
    second = np.where(r2 > 0.0, special.gammainc(1.5, x) * special.gamma(1.5) / quarter**1.5,
                      (2.0 / 3.0) / t_max**1.5)
    return (first + 3.0 / 16.0 * second) / (4.0 * math.pi) ** 1.5


@functools.lru_cache(maxsize=16)
def lattice_green_function(extent: int) -> np.ndarray:
    """
    Green's function of the 7-point Laplacian on Z^3 with unit spacing.

    g(m) = integral over t > 0 of prod_i exp(-2t) I_{m_i}(2t) dt, so that
    6 g(m) - sum of the six neighbors = delta_{m,0} and g -> 0 at infinity.

    Args:
        extent: Largest offset per axis.

    Returns:
        Read-only array g[a, b, c] for 0 <= a, b, c <= extent.
    """
    s = np.arange(GREEN_LOG_T_MIN, math.log(GREEN_T_MAX) + 0.5 * GREEN_LOG_STEP, GREEN_LOG_STEP)
    t = np.exp(s)
    weights = np.full(len(s), GREEN_LOG_STEP) * t
    weights[0] *= 0.5
    weights[-1] *= 0.5
    t_max = float(t[-1])
    m = np.arange(extent + 1)
    table = special.ive(m[:, None], 2.0 * t[None, :])
    g = np.einsum("s,as,bs,cs->abc", weights, table, table, table, optimize=True)
    r2 = (m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2).astype(float)
    g += _heat_kernel_tail(r2, t_max)
    g.setflags(write=False)
    logger.debug(f"lattice Green function up to offset {extent}: g(0) = {g[0, 0, 0]!r}")
    return g


def free_space_padding(n: int) -> int:
    """Cells added on each side of the box for free-space fields (about 2n per side in total)."""
    return (n + 1) // 2


def _free_space_solve(rhs: np.ndarray, h: float) -> np.ndarray:
    n = rhs.shape[0]
    p = free_space_padding(n) + 1
    extent = n - 1 + p
    g = lattice_green_function(extent)
    index = np.abs(np.arange(-extent, extent + 1))
    kernel = g[np.ix_(index, index, index)]
    full = fftconvolve(rhs, kernel, mode="full")
    start = extent - p
    stop = extent + n + p
    return h**2 * full[start:stop, start:stop, start:stop]


def poisson_solve(rhs: ScalarField, bc: BoundaryCondition) -> ScalarField:
    """
    Solve -Lap_h v = rhs under the given closure.

    Neumann and periodic solutions are normalized to zero mean. Free-space
    solutions live on an enlarged grid.

    Raises:
        LdlabError: NONZERO_MEAN for a non mean-free rhs under N/P,
            SOLVER_NON_CONVERGENCE if the residual exceeds 1e-10 relative,
            PRECONDITION_VIOLATED for n < 4.
    """
    _check_grid(rhs.n)
    if rhs.padding:
        raise LdlabError(ErrorCode.GRID_MISMATCH, "Right-hand side must live on the box grid.")
    f = np.asarray(rhs.values)
    h = rhs.h
    scale = float(np.sqrt(np.sum(f * f)))
    if bc in (BoundaryCondition.NEUMANN, BoundaryCondition.PERIODIC):
        if abs(float(f.sum())) > 1e-10 * max(float(np.abs(f).sum()), 1.0):
            raise LdlabError(ErrorCode.NONZERO_MEAN, f"Right-hand side has mean {f.mean()!r}; {bc.value} needs zero.")
    if bc is BoundaryCondition.FREE_SPACE:
        solution = ScalarField(rhs.box, rhs.n, _free_space_solve(f, h), padding=free_space_padding(rhs.n) + 1)
        target = np.pad(f, free_space_padding(rhs.n))
    else:
        values = _spectral_solve(f, h, bc)
        if bc is not BoundaryCondition.DIRICHLET:
            values = values - values.mean()
        solution = ScalarField(rhs.box, rhs.n, values)
        target = f
    residual = float(np.sqrt(np.sum((negative_laplacian(solution, bc) - target) ** 2)))
    logger.debug(f"poisson_solve {bc.value} n={rhs.n}: residual {residual!r} (rhs norm {scale!r})")
    if residual > RESIDUAL_TOLERANCE * scale:
        raise LdlabError(ErrorCode.SOLVER_NON_CONVERGENCE,
                         f"Residual {residual!r} exceeds {RESIDUAL_TOLERANCE} x {scale!r} ({bc.value}).")
    return solution


def neutral_rhs(voxels: VoxelSet, theta: float) -> np.ndarray:
    """Samples of 1_Omega - theta on the box cells."""
    return voxels.occupancy.astype(float) - theta


def check_neutrality(voxels: VoxelSet, theta: float) -> None:
    """
    Raises:
        LdlabError: NEUTRALITY_VIOLATION if | |Omega| - theta L^3 | exceeds one voxel.
    """
    defect = volume(voxels) - theta * voxels.box.volume
    if abs(defect) > voxels.h**3 * (1.0 + 1e-9):
        raise LdlabError(ErrorCode.NEUTRALITY_VIOLATION,
                         f"|Omega| - theta L^3 = {defect!r} exceeds one voxel volume {voxels.h**3!r}.")


def potential(voxels: VoxelSet, theta: float, bc: BoundaryCondition) -> ScalarField:
    """
    Potential of 1_Omega - theta 1_{Q_L} under the given boundary condition.

    Under Neumann and periodic closure the set must be neutral within one
    voxel; the residual charge is projected out before solving.

    Raises:
        LdlabError: NEUTRALITY_VIOLATION, PRECONDITION_VIOLATED (n < 4).
    """
    ensure(validate_fraction("theta", theta))
    _check_grid(voxels.n)
    f = neutral_rhs(voxels, theta)
    if bc in (BoundaryCondition.NEUMANN, BoundaryCondition.PERIODIC):
        check_neutrality(voxels, theta)
        f = f - f.mean()
    return poisson_solve(ScalarField(voxels.box, voxels.n, f), bc)


def _face_sum(values: np.ndarray) -> float:
    return float(sum(np.sum(np.diff(values, axis=a) ** 2) for a in range(3)))


def gradient_energy(v: ScalarField, bc: BoundaryCondition) -> float:
    """
    Discrete 1/2 integral of |grad v|^2.

    Interior faces contribute (dv)^2; every boundary face adds v_b (v_b - v_ghost)
    with the ghost value of the closure, so the result equals h^3 <f, v> / 2 for
    v solving -Lap_h v = f. For free-space fields the ghost values are the
    exterior lattice values, which accounts for all faces outside the grid.
    """
    h = v.h
    if bc is BoundaryCondition.FREE_SPACE:
        if v.padding < 1:
            raise LdlabError(ErrorCode.PRECONDITION_VIOLATED, "Free-space field needs an exterior layer.")
        outer = v.values
        inner = outer[1:-1, 1:-1, 1:-1]
        boundary = 0.0
        for axis in range(3):
            for side, ghost_index in ((0, 0), (-1, -1)):
                cells = np.take(inner, side, axis=axis)
                ghost = np.take(outer, ghost_index, axis=axis)[1:-1, 1:-1]
                boundary += float(np.sum(cells * (cells - ghost)))
        return 0.5 * h * (_face_sum(inner) + boundary)
    values = np.asarray(v.values)
    boundary = 0.0
    for axis in range(3):
        first = np.take(values, 0, axis=axis)
        last = np.take(values, -1, axis=axis)
        if bc is BoundaryCondition.DIRICHLET:
            boundary += 2.0 * float(np.sum(first**2) + np.sum(last**2))
        elif bc is BoundaryCondition.PERIODIC:
            boundary += float(np.sum((first - last) ** 2))
    return 0.5 * h * (_face_sum(values) + boundary)


def pairing_energy(v: ScalarField, rhs: np.ndarray) -> float:
    """h^3 <f, v> / 2 over the box cells."""
    return 0.5 * v.h**3 * float(np.sum(np.asarray(rhs) * v.core))


def green_double_sum(voxels: VoxelSet, theta: float) -> float:
    """
    Free-space interaction as a direct double sum over displacement classes.

    1/2 h^5 sum_{i,j} f_i g(i - j) f_j with the lattice Green's function g,
    accumulated from the autocorrelation of f.
    """
    f = neutral_rhs(voxels, theta)
    n = voxels.n
    correlation = fftconvolve(f, f[::-1, ::-1, ::-1], mode="full")
    g = lattice_green_function(n - 1)
    index = np.abs(np.arange(-(n - 1), n))
    return 0.5 * voxels.h**5 * float(np.sum(correlation * g[np.ix_(index, index, index)]))


def exterior_energy_estimate(v: ScalarField) -> float:
    """
    Continuum monopole plus dipole estimate of the free-space energy beyond
    the enlarged grid, q^2 J1 / (32 pi^2 s) + |p|^2 J3 / (48 pi^2 s^3).
    """
    f = negative_laplacian(v, BoundaryCondition.FREE_SPACE)
    h = v.h
    size = f.shape[0]
    coords = (np.arange(size) - (size - 1) / 2.0) * h
    q = h**3 * float(f.sum())
    dipole = h**3 * np.array([
        float(np.sum(f * coords[:, None, None])),
        float(np.sum(f * coords[None, :, None])),
        float(np.sum(f * coords[None, None, :])),
    ])
    s = 0.5 * size * h
    return (q**2 * cube_face_integral(2.0) / (32.0 * math.pi**2 * s)
            + float(dipole @ dipole) * cube_face_integral(3.0) / (48.0 * math.pi**2 * s**3))


def write_fld(field: ScalarField, path: Union[str, Path]) -> None:
    """Write the box values as '.fld': header 'L n' and n^3 little-endian doubles, x fastest."""
    with open(path, "wb") as handle:
        handle.write(f"{field.box.L!r} {field.n}\n".encode("ascii"))
        handle.write(np.ascontiguousarray(field.core).ravel(order="F").astype("<f8").tobytes())


def read_fld(path: Union[str, Path]) -> ScalarField:
    """
    Read a '.fld' file.

    Raises:
        LdlabError: INVALID_INPUT on a malformed header or payload.
    """
    data = Path(path).read_bytes()
    header, sep, payload = data.partition(b"\n")
    try:
        L_text, n_text = header.decode("ascii").split()
        L, n = float(L_text), int(n_text)
    except ValueError:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Malformed .fld header in {path}.")
    if not sep or len(payload) != 8 * n**3:
        raise LdlabError(ErrorCode.INVALID_INPUT, f"Expected {8 * n**3} payload bytes in {path}, found {len(payload)}.")
    values = np.frombuffer(payload, dtype="<f8").reshape((n, n, n), order="F")
    return ScalarField(DomainBox(L), n, values)
