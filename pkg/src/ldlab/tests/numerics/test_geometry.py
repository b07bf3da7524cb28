"""
Tests for voxel sets, perimeters, moments, localization and shape samples.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldlab.numerics.geometry import (
    CuboidSpec, DomainBox, ShapeSample, VoxelSet, apply_cube_symmetry, average_piece_perimeter,
    box_face_area, complement_in_box, cube_symmetries, cuboid_moments, cut_pair_counts, diameter, filling_fraction,
    localize, moments, perimeter, piece_perimeter_sum, quantize_shift, random_neutral_set, read_vox,
    shift_offsets, volume, voxelize_ball, write_vox,
)
from ldlab.shared.data_types import ErrorCode, LdlabError


def _single_cell(n: int = 4, L: float = 4.0) -> VoxelSet:
    occupancy = np.zeros((n, n, n), dtype=bool)
    occupancy[1, 2, 1] = True
    return VoxelSet(DomainBox(L), n, occupancy)


def test_single_cell_volume_and_perimeter():
    """Test that one interior cell has volume h^3 and six faces."""
    voxels = _single_cell()

    assert volume(voxels) == 1.0
    assert perimeter(voxels) == 6.0
    assert box_face_area(voxels) == 0.0


def test_full_box_perimeter_is_box_surface():
    """Test that the full box has the box surface as perimeter."""
    voxels = VoxelSet.full(3.0, 6)

    assert perimeter(voxels) == pytest.approx(54.0)
    assert box_face_area(voxels) == pytest.approx(54.0)


def test_occupancy_shape_mismatch():
    """Test that an occupancy grid of the wrong shape is rejected."""
    with pytest.raises(LdlabError) as excinfo:
        VoxelSet(DomainBox(1.0), 4, np.zeros((4, 4, 3), dtype=bool))
    assert excinfo.value.code == ErrorCode.GRID_MISMATCH


def test_complement_identity_on_random_sets():
    """Test Per(complement) = Per + 6 L^2 - 2 (box face area) on seeded random sets."""
    for seed in range(10):
        voxels = random_neutral_set(12.0, 12, 0.3, seed)
        complement = complement_in_box(voxels)
        expected = perimeter(voxels) + 6.0 * voxels.L**2 - 2.0 * box_face_area(voxels)
        assert perimeter(complement) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000), theta=st.floats(min_value=0.05, max_value=0.95))
def test_complement_is_an_involution(seed, theta):
    """Test that complementing twice gives the original set."""
    voxels = random_neutral_set(8.0, 8, theta, seed)

    assert complement_in_box(complement_in_box(voxels)).same_as(voxels)


def test_random_neutral_set_is_exactly_neutral():
    """Test that random sets carry round(theta n^3) cells."""
    voxels = random_neutral_set(16.0, 16, 0.3, seed=4)

    assert voxels.count == round(0.3 * 16**3)
    assert random_neutral_set(16.0, 16, 0.3, seed=4).same_as(voxels)


def test_filling_fraction_of_rounded_set():
    """Test that the realized density is count / n^3 and not the requested theta."""
    voxels = random_neutral_set(8.0, 8, 0.02, seed=1)

    assert voxels.count == 10
    assert filling_fraction(voxels) == pytest.approx(10 / 512)
    assert filling_fraction(VoxelSet.full(4.0, 4)) == 1.0


def test_cube_symmetries_preserve_perimeter_and_volume():
    """Test invariance of volume and perimeter under the 48 cube symmetries."""
    voxels = random_neutral_set(8.0, 8, 0.2, seed=1)
    symmetries = list(cube_symmetries())

    assert len(symmetries) == 48
    for permutation, flips in symmetries:
        image = apply_cube_symmetry(voxels, permutation, flips)
        assert image.count == voxels.count
        assert perimeter(image) == perimeter(voxels)


def test_ball_moments_vanish():
    """Test that a centered voxel ball has no dipole and a traceless symmetric quadrupole."""
    m = moments(voxelize_ball(8.0, 16, 2.5))

    assert np.abs(m.d).max() <= 1e-12
    assert m.is_symmetric()
    assert m.trace_defect() <= 1e-12


def test_moments_with_background_cancel_monopole():
    """Test that a neutral set minus its background has zero charge."""
    voxels = random_neutral_set(8.0, 8, 0.25, seed=2)
    m = moments(voxels, 0.25, CuboidSpec.cube(8.0))

    assert abs(m.q) <= 1e-10


def test_moments_containment_failure():
    """Test that occupied cells outside the background cuboid are rejected."""
    voxels = VoxelSet.full(4.0, 4)
    with pytest.raises(LdlabError) as excinfo:
        moments(voxels, 0.1, CuboidSpec.cube(2.0))
    assert excinfo.value.code == ErrorCode.CONTAINMENT_FAILURE


def test_cuboid_moments_closed_form():
    """Test the quadrupole of an off-center cuboid against the point-cloud rule."""
    cuboid = CuboidSpec((1.0, 2.0, 3.0), (0.5, -0.25, 1.0))
    exact = cuboid_moments(cuboid, 2.0)
    sampled = ShapeSample.cuboid(cuboid).moments().scaled(2.0)

    assert exact.q == pytest.approx(12.0)
    np.testing.assert_allclose(exact.d, sampled.d, atol=1e-12)
    np.testing.assert_allclose(exact.P, sampled.P, atol=1e-10)


def test_shift_offsets():
    """Test the offsets s with s / k in [-1/2, 1/2)."""
    assert list(shift_offsets(4)) == [-2, -1, 0, 1]
    assert list(shift_offsets(3)) == [-1, 0, 1]


def test_quantize_shift_rejects_off_grid():
    """Test that shifts off the 1/k grid are rejected."""
    assert quantize_shift((-0.5, 0.0, 0.25), 4) == (-2, 0, 1)
    with pytest.raises(LdlabError) as excinfo:
        quantize_shift((0.1, 0.0, 0.0), 4)
    assert excinfo.value.code == ErrorCode.GRID_MISMATCH


def test_localize_rejects_off_grid_length():
    """Test that R must be a multiple of h."""
    with pytest.raises(LdlabError) as excinfo:
        localize(random_neutral_set(8.0, 8, 0.3, 0), 1.5, (0.0, 0.0, 0.0))
    assert excinfo.value.code == ErrorCode.GRID_MISMATCH


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000), k=st.sampled_from([2, 4]),
       shift=st.tuples(*[st.integers(min_value=-1, max_value=0)] * 3))
def test_localization_partitions_the_set(seed, k, shift):
    """Test that the pieces partition the set and their perimeters match the cut count."""
    voxels = random_neutral_set(8.0, 8, 0.3, seed)
    mu = tuple(s / k for s in shift)
    pieces = localize(voxels, float(k), mu)

    union = np.zeros_like(voxels.occupancy)
    for piece in pieces:
        assert not np.any(union & piece.occupancy)
        union |= piece.occupancy
    assert np.array_equal(union, voxels.occupancy)
    assert sum(perimeter(p) for p in pieces) == pytest.approx(piece_perimeter_sum(voxels, float(k), mu))


def test_average_piece_perimeter_matches_all_shifts():
    """Test that the closed-form shift average equals the mean over all k^3 shifts."""
    voxels = random_neutral_set(8.0, 8, 0.4, seed=3)
    k = 2
    sums = [piece_perimeter_sum(voxels, 2.0, (a / k, b / k, c / k))
            for a in shift_offsets(k) for b in shift_offsets(k) for c in shift_offsets(k)]

    assert average_piece_perimeter(voxels, 2.0) == pytest.approx(np.mean(sums), rel=1e-12)
    assert cut_pair_counts(voxels, k).shape == (3, k)


def test_diameter_of_single_cell():
    """Test that one cell has the cell diagonal as diameter bound."""
    assert diameter(_single_cell()) == pytest.approx(math.sqrt(3.0))
    with pytest.raises(LdlabError) as excinfo:
        diameter(VoxelSet.empty(1.0, 2))
    assert excinfo.value.code == ErrorCode.EMPTY_SET


def test_vox_file_round_trip(tmp_path):
    """Test writing and reading a .vox file."""
    voxels = random_neutral_set(5.0, 9, 0.3, seed=5)
    path = tmp_path / "set.vox"
    write_vox(voxels, path)

    assert read_vox(path).same_as(voxels)


def test_read_vox_truncated(tmp_path):
    """Test that a truncated payload is rejected."""
    path = tmp_path / "bad.vox"
    path.write_bytes(b"4.0 4\n\x00")
    with pytest.raises(LdlabError) as excinfo:
        read_vox(path)
    assert excinfo.value.code == ErrorCode.INVALID_INPUT


def test_ellipsoid_sample_volume_and_quadrupole():
    """Test the quadrature rule on an ellipsoid."""
    a = np.array([1.2, 1.0, 0.8])
    shape = ShapeSample.ellipsoid(a)
    V = 4.0 * math.pi / 3.0 * float(np.prod(a))
    second = V * a**2 / 5.0
    m = shape.moments()

    assert shape.volume == pytest.approx(V, rel=1e-12)
    np.testing.assert_allclose(np.diag(m.P), 3.0 * second - second.sum(), rtol=1e-10, atol=1e-12)
    assert shape.diameter() == pytest.approx(2.4)


def test_shape_sample_rigid_motion():
    """Test that a rotation keeps volume and diameter and moves the center of mass."""
    shape = ShapeSample.ellipsoid((1.1, 1.0, 0.9))
    angle = 0.3
    rotation = np.array([[math.cos(angle), -math.sin(angle), 0.0],
                         [math.sin(angle), math.cos(angle), 0.0],
                         [0.0, 0.0, 1.0]])
    moved = shape.transformed(rotation, (1.0, 2.0, 3.0))

    assert moved.volume == pytest.approx(shape.volume, rel=1e-12)
    assert moved.diameter() == pytest.approx(shape.diameter())
    np.testing.assert_allclose(moved.moments().d / moved.volume, [1.0, 2.0, 3.0], atol=1e-12)
