"""
Tests for the energy functionals and the boundary-condition orderings.
"""

import math

import numpy as np
import pytest

from ldlab.numerics.energy import (
    RESCALING_TOLERANCE, EnergyBreakdown, ReferenceConstants, anisotropic_energy, ball_energy_analytic,
    ball_energy_per_volume, bc_energy, boundary_energies, box_energy, free_space_rescaling, lattice_kernel_table,
    ordering_margins, whole_space_energy, yukawa_self_energy,
)
from ldlab.numerics.fields_bc import BoundaryCondition
from ldlab.numerics.geometry import (
    DomainBox, VoxelSet, apply_cube_symmetry, complement_in_box, cube_symmetries, filling_fraction, perimeter,
    perimeter_by_axis, random_neutral_set, volume, voxelize_ball,
)
from ldlab.numerics.kernels import self_cell_constant
from ldlab.shared.data_types import ErrorCode, LdlabError


def test_ball_ansatz_constants():
    """Test r* = (15 / 8 pi)^(1/3), A* = 5/2 and e* = e(r*)."""
    refs = ReferenceConstants.ball_ansatz()

    assert refs.rStar == pytest.approx((15.0 / (8.0 * math.pi)) ** (1.0 / 3.0))
    assert refs.aStar == pytest.approx(2.5)
    assert refs.eStar == pytest.approx(ball_energy_per_volume(refs.rStar), rel=1e-14)
    assert refs.eStar == pytest.approx(5.3447797702, rel=1e-9)


def test_ball_radius_minimizes_energy_per_volume():
    """Test that e(r) is minimal at r*."""
    r = ReferenceConstants.ball_ansatz().rStar
    for factor in (0.9, 0.99, 1.01, 1.1):
        assert ball_energy_per_volume(factor * r) > ball_energy_per_volume(r)


def test_configured_e_star():
    """Test overriding e* and rejecting a nonpositive value."""
    refs = ReferenceConstants.ball_ansatz().with_e_star(5.2)

    assert refs.eStar == 5.2
    assert refs.label == "configured"
    with pytest.raises(LdlabError) as excinfo:
        ReferenceConstants.ball_ansatz().with_e_star(0.0)
    assert excinfo.value.code == ErrorCode.INVALID_INPUT


def test_ball_energy_analytic_per_volume():
    """Test that the analytic ball energy divided by the volume is e(r)."""
    r = 0.7
    breakdown = ball_energy_analytic(r)

    assert breakdown.total / (4.0 * math.pi / 3.0 * r**3) == pytest.approx(ball_energy_per_volume(r), rel=1e-13)


def test_energy_breakdown_to_dict():
    """Test serialization with and without the interaction split."""
    plain = EnergyBreakdown(2.0, 3.0)
    split = EnergyBreakdown(2.0, 3.0, (1.0, 1.5, 0.5))

    assert plain.to_dict() == {"perimeter": 2.0, "interaction": 3.0, "total": 5.0}
    assert split.to_dict()["parts"] == {"self": 1.0, "near": 1.5, "far": 0.5}


def test_single_cell_self_energy():
    """Test that one unit cell carries half the mean inverse distance as interaction."""
    occupancy = np.zeros((4, 4, 4), dtype=bool)
    occupancy[2, 1, 1] = True
    voxels = VoxelSet(DomainBox(4.0), 4, occupancy)
    energy = whole_space_energy(voxels)

    assert energy.perimeter == 6.0
    assert energy.interaction == pytest.approx(0.5 * self_cell_constant(), rel=1e-10)
    assert abs(energy.parts[1]) <= 1e-12
    assert abs(energy.parts[2]) <= 1e-12


def test_voxel_ball_interaction_matches_analytic():
    """Test the Coulomb self energy of a voxel ball against (16 pi^2 / 15) r^5."""
    voxels = voxelize_ball(8.0, 24, 3.0)
    r_equivalent = (3.0 * volume(voxels) / (4.0 * math.pi)) ** (1.0 / 3.0)
    energy = whole_space_energy(voxels)

    assert energy.interaction == pytest.approx(ball_energy_analytic(r_equivalent).interaction, rel=0.03)


def test_whole_space_energy_rejects_empty_set():
    """Test that the empty set has no whole-space energy."""
    with pytest.raises(LdlabError) as excinfo:
        whole_space_energy(VoxelSet.empty(2.0, 4))
    assert excinfo.value.code == ErrorCode.EMPTY_SET


def test_fft_and_direct_autocorrelation_agree():
    """Test that both summation methods give the same box energy."""
    voxels = random_neutral_set(5.0, 5, 0.4, seed=9)
    fft_energy = box_energy(voxels, 0.4, "fft")
    direct_energy = box_energy(voxels, 0.4, "direct")

    assert fft_energy.interaction == pytest.approx(direct_energy.interaction, rel=1e-10)
    assert fft_energy.perimeter == direct_energy.perimeter


def test_box_energy_unknown_method():
    """Test that an unknown summation method is rejected."""
    with pytest.raises(LdlabError) as excinfo:
        box_energy(random_neutral_set(4.0, 4, 0.5, seed=0), 0.5, "multigrid")
    assert excinfo.value.code == ErrorCode.INVALID_INPUT


def test_complement_has_equal_interaction():
    """Test that Omega at theta and its complement at 1 - theta share the interaction."""
    voxels = random_neutral_set(8.0, 8, 0.3, seed=4)
    energy = box_energy(voxels, 0.3)
    complement = box_energy(complement_in_box(voxels), 0.7)

    assert complement.interaction == pytest.approx(energy.interaction, rel=1e-10)
    assert complement.perimeter == pytest.approx(perimeter(complement_in_box(voxels)))


def test_anisotropic_energy_identity_scaling():
    """Test that lambda = (1, 1, 1) reproduces the box energy."""
    voxels = random_neutral_set(6.0, 6, 0.2, seed=1)

    assert anisotropic_energy(voxels, 0.2, (1.0, 1.0, 1.0)).total == pytest.approx(box_energy(voxels, 0.2).total)


def test_anisotropic_energy_perimeter_scaling():
    """Test that faces normal to axis a scale by 1 / lambda_a."""
    voxels = random_neutral_set(6.0, 6, 0.2, seed=2)
    lam = (2.0, 0.5, 1.0)
    expected = float(np.sum(perimeter_by_axis(voxels) / np.array(lam)))

    assert anisotropic_energy(voxels, 0.2, lam).perimeter == pytest.approx(expected)


def test_anisotropic_energy_determinant_constraint():
    """Test that lambda with product different from one is rejected."""
    with pytest.raises(LdlabError) as excinfo:
        anisotropic_energy(random_neutral_set(4.0, 4, 0.5, seed=0), 0.5, (2.0, 1.0, 1.0))
    assert excinfo.value.code == ErrorCode.DETERMINANT_CONSTRAINT


def test_yukawa_self_energy_below_coulomb():
    """Test that screening lowers the self energy monotonically in omega."""
    voxels = voxelize_ball(6.0, 12, 2.0)
    coulomb_part = whole_space_energy(voxels).interaction
    weak = yukawa_self_energy(voxels, 0.1)
    strong = yukawa_self_energy(voxels, 1.0)

    assert 0.0 < strong < weak < coulomb_part
    with pytest.raises(LdlabError) as excinfo:
        yukawa_self_energy(voxels, 0.0)
    assert excinfo.value.code == ErrorCode.NONPOSITIVE_RATE


@pytest.mark.parametrize("theta", [0.1, 0.3, 0.5])
def test_boundary_condition_orderings(theta):
    """Test E_D <= E_P <= E_N and E_D <= E_inf <= E_N on exactly neutral sets."""
    voxels = random_neutral_set(10.0, 10, theta, seed=21)
    energies = boundary_energies(voxels, theta)
    margins = ordering_margins(energies)

    assert set(energies) == set(BoundaryCondition)
    assert len(margins) == 4
    for name, margin in margins.items():
        assert margin >= -1e-8, name


def test_bc_energy_perimeter_is_shared():
    """Test that every closure uses the same perimeter."""
    voxels = random_neutral_set(8.0, 8, 0.25, seed=5)
    per = perimeter(voxels)

    for bc in BoundaryCondition:
        assert bc_energy(voxels, 0.25, bc).perimeter == per


@pytest.mark.parametrize("bc", list(BoundaryCondition))
def test_bc_energy_neutrality_violation(bc):
    """Test that every closure rejects a charged set."""
    with pytest.raises(LdlabError) as excinfo:
        bc_energy(voxelize_ball(8.0, 8, 2.0), 0.5, bc)
    assert excinfo.value.code == ErrorCode.NEUTRALITY_VIOLATION


def test_energies_invariant_under_cube_symmetries():
    """Test that box and boundary-condition energies are unchanged by the 48 cube symmetries."""
    voxels = random_neutral_set(8.0, 8, 0.25, seed=8)
    box = box_energy(voxels, 0.25).total
    closures = {bc: energy.total for bc, energy in boundary_energies(voxels, 0.25).items()}

    for permutation, flips in cube_symmetries():
        image = apply_cube_symmetry(voxels, permutation, flips)
        assert box_energy(image, 0.25).total == pytest.approx(box, rel=1e-9)
        for bc, energy in boundary_energies(image, 0.25).items():
            assert energy.total == pytest.approx(closures[bc], rel=1e-9), bc


@pytest.mark.parametrize("n", [6, 8, 12])
def test_lattice_kernel_paths_agree(n):
    """Test the lattice-kernel double sum against the free-space Poisson path."""
    voxels = random_neutral_set(float(n), n, 0.3, seed=n)
    theta = filling_fraction(voxels)
    fft_energy = box_energy(voxels, theta, "fft", kernel="lattice")
    direct_energy = box_energy(voxels, theta, "direct", kernel="lattice")
    free_energy = box_energy(voxels, theta, "free_space", kernel="lattice")

    assert fft_energy.interaction == pytest.approx(direct_energy.interaction, rel=1e-10)
    assert free_energy.interaction == pytest.approx(fft_energy.interaction, rel=1e-6)
    assert free_energy.perimeter == fft_energy.perimeter


def test_free_space_method_needs_lattice_kernel():
    """Test that the cell kernel has no free-space path and unknown kernels are rejected."""
    voxels = random_neutral_set(4.0, 4, 0.5, seed=0)
    for method, kernel in (("free_space", "cell"), ("fft", "spectral")):
        with pytest.raises(LdlabError) as excinfo:
            box_energy(voxels, 0.5, method, kernel=kernel)
        assert excinfo.value.code == ErrorCode.INVALID_INPUT


def test_lattice_kernel_table_far_field():
    """Test that the lattice kernel approaches h^5 / |d| away from the origin."""
    table = lattice_kernel_table(12, 0.5)
    center = 11

    assert table[center + 11, center, center] == pytest.approx(0.5**5 / 11.0, rel=1e-2)
    assert table[center, center, center] == pytest.approx(4.0 * math.pi * 0.5**5 * 0.2527, rel=1e-3)


@pytest.mark.parametrize("n", [8, 12, 16, 24])
def test_free_space_rescaling_report(n):
    """Test that the rescaled free-space energy reproduces the lattice-kernel box energy."""
    voxels = random_neutral_set(8.0, n, 0.3, seed=7)
    theta = filling_fraction(voxels)
    report = free_space_rescaling(voxels, theta)
    scale = (4.0 * math.pi) ** (1.0 / 3.0)

    assert report["box_energy"] == pytest.approx(box_energy(voxels, theta).total)
    assert report["lattice_box_energy"] == pytest.approx(box_energy(voxels, theta, kernel="lattice").total)
    assert report["rescaled_free_space_energy"] == pytest.approx(report["free_space_energy"] / scale**2)
    assert report["relative_difference"] <= RESCALING_TOLERANCE


def test_discretization_gap_shrinks_under_refinement():
    """Test that the lattice and cell kernels converge as the grid is refined."""
    gaps = [free_space_rescaling(voxelize_ball(8.0, n, 3.0), 0.0)["discretization_gap"] for n in (8, 16)]

    assert 0.0 < gaps[1] < gaps[0]
