"""
Tests for the lower-bound certificate and the localization and Yukawa estimates behind it.
"""

import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from ldlab.numerics.energy import ReferenceConstants, whole_space_energy
from ldlab.numerics.geometry import (
    VoxelSet, average_piece_perimeter, localize, piece_perimeter_sum, random_neutral_set, voxelize_ball,
)
from ldlab.numerics.lowerbound import (
    certificate_value, deficit_rate, linearized_certificate_value, linearized_schedule, localization_bound,
    localization_shift, lower_bound_check, optimize_certificate, piece_energy_ratios, yukawa_interaction_bound,
    yukawa_margin,
)
from ldlab.shared.data_types import ErrorCode, LdlabError

E_STAR = ReferenceConstants.ball_ansatz().eStar


def test_certificate_value_formula():
    """Test the three terms of the certificate at a fixed point."""
    cert = certificate_value(0.01, 0.1, 3.0, E_STAR)
    expected = math.exp(-math.sqrt(3.0) * 0.3) * E_STAR - 4.0 * math.pi * 0.01 / 0.01 - 2.0

    assert cert.value == pytest.approx(expected, rel=1e-14)
    assert cert.deficit == pytest.approx(E_STAR - expected)
    assert cert.to_dict()["omega"] == 0.1


def test_certificate_value_rejects_bad_parameters():
    """Test theta = 0 and a nonpositive omega."""
    for args in ((0.0, 0.1, 3.0), (0.01, 0.0, 3.0), (0.01, 0.1, -1.0)):
        with pytest.raises(LdlabError) as excinfo:
            certificate_value(*args, E_STAR)
        assert excinfo.value.code == ErrorCode.INVALID_INPUT


@settings(max_examples=100, deadline=None)
@given(theta=st.floats(min_value=1e-8, max_value=1.0), omega=st.floats(min_value=1e-3, max_value=5.0),
       R=st.floats(min_value=0.1, max_value=100.0))
def test_linearized_certificate_is_smaller(theta, omega, R):
    """Test that replacing exp(-x) by 1 - x never raises the certificate."""
    exact = certificate_value(theta, omega, R, E_STAR).value

    assert linearized_certificate_value(theta, omega, R, E_STAR) <= exact + 1e-12 * max(1.0, abs(exact))


def test_optimized_certificate_beats_schedules():
    """Test that the refined certificate is at least the starting and linearized schedules."""
    theta = 1e-5
    cert = optimize_certificate(theta, E_STAR)
    omega, R = linearized_schedule(theta, E_STAR)

    assert cert.value >= cert.schedule["value0"]
    assert cert.value >= certificate_value(theta, omega, R, E_STAR).value - 1e-12
    assert 0.0 < cert.value < E_STAR


def test_optimized_certificate_is_stationary():
    """Test that small moves of omega or R do not improve the optimum."""
    theta = 1e-4
    cert = optimize_certificate(theta, E_STAR)
    for d_omega, d_R in ((1.01, 1.0), (0.99, 1.0), (1.0, 1.01), (1.0, 0.99)):
        moved = certificate_value(theta, cert.omega * d_omega, cert.R * d_R, E_STAR).value
        assert moved <= cert.value + 1e-12


@settings(max_examples=30, deadline=None)
@given(a=st.floats(min_value=1e-7, max_value=0.5), b=st.floats(min_value=1e-7, max_value=0.5))
def test_certificate_is_monotone_in_theta(a, b):
    """Test that a denser background never gives a larger certificate."""
    assume(abs(a - b) > 1e-3 * max(a, b))
    low, high = sorted((a, b))
    small = optimize_certificate(low, E_STAR).value
    large = optimize_certificate(high, E_STAR).value

    assert large <= small + 1e-9 * max(1.0, abs(small))


def test_deficit_rate_is_one_fifth():
    """Test the theta^(1/5) decay of the deficit for small theta."""
    report = deficit_rate([1e-9, 1e-8, 1e-7, 1e-6], E_STAR)

    assert len(report["certificates"]) == 4
    assert report["deficits"] == sorted(report["deficits"])
    assert 0.15 <= report["slope"] <= 0.25


@pytest.mark.parametrize("theta", [1e-9, 1e-7, 1e-5])
def test_deficit_constant_is_reported(theta):
    """Test that the schedule carries C = deficit / theta^(1/5) below the linearized constant."""
    cert = optimize_certificate(theta, E_STAR)
    omega, R = linearized_schedule(theta, E_STAR)
    linearized_constant = (E_STAR - linearized_certificate_value(theta, omega, R, E_STAR)) / theta**0.2

    assert cert.schedule["deficit_constant"] == pytest.approx(cert.deficit / theta**0.2, rel=1e-12)
    assert cert.to_dict()["schedule"]["deficit_constant"] == cert.schedule["deficit_constant"]
    assert 0.0 < cert.schedule["deficit_constant"] <= linearized_constant * (1.0 + 1e-9)


def test_deficit_constant_approaches_linearized_constant():
    """Test that C tends to the linearized constant as theta -> 0."""
    theta = 1e-9
    omega, R = linearized_schedule(theta, E_STAR)
    linearized_constant = (E_STAR - linearized_certificate_value(theta, omega, R, E_STAR)) / theta**0.2

    assert optimize_certificate(theta, E_STAR).schedule["deficit_constant"] >= 0.95 * linearized_constant


def test_yukawa_interaction_bound_without_background():
    """Test zero slack at theta = 0 and a Yukawa self energy below the Coulomb one."""
    voxels = voxelize_ball(6.0, 12, 2.0)
    yukawa_self, slack = yukawa_interaction_bound(voxels, 0.0, 0.5)

    assert slack == 0.0
    assert 0.0 < yukawa_self < whole_space_energy(voxels).interaction
    with pytest.raises(LdlabError) as excinfo:
        yukawa_interaction_bound(voxels, 0.0, -1.0)
    assert excinfo.value.code == ErrorCode.NONPOSITIVE_RATE


def test_yukawa_margin_is_nonnegative():
    """Test Coulomb interaction >= Yukawa self energy - 8 pi theta |Omega| / omega^2."""
    voxels = random_neutral_set(8.0, 8, 0.2, seed=14)
    for omega in (0.2, 1.0):
        margin = yukawa_margin(voxels, 0.2, omega)
        assert margin["relative_margin"] >= -1e-8
        assert margin["slack"] == pytest.approx(8.0 * math.pi * 0.2 * voxels.count / omega**2)


def test_localization_shift_is_optimal():
    """Test that the chosen shift attains the minimum over all shifts."""
    voxels = random_neutral_set(8.0, 8, 0.35, seed=10)
    mu0, piece_sum = localization_shift(voxels, 4.0)

    assert piece_sum == pytest.approx(piece_perimeter_sum(voxels, 4.0, mu0))
    assert sum(p.count for p in localize(voxels, 4.0, mu0)) == voxels.count
    assert piece_sum <= average_piece_perimeter(voxels, 4.0) + 1e-12
    assert average_piece_perimeter(voxels, 4.0) <= localization_bound(voxels, 4.0) + 1e-12


def test_piece_energy_ratios():
    """Test one positive ratio per nonempty piece."""
    voxels = random_neutral_set(8.0, 8, 0.2, seed=6)
    mu0, _ = localization_shift(voxels, 4.0)
    pieces = [p for p in localize(voxels, 4.0, mu0) if p.count]
    ratios = piece_energy_ratios(voxels, 4.0)

    assert len(ratios) == len(pieces)
    assert all(r > 0.0 for r in ratios)


def test_lower_bound_check_on_random_set():
    """Test that a random neutral set lies above the certificate."""
    voxels = random_neutral_set(10.0, 10, 0.1, seed=1)
    report = lower_bound_check(voxels, 0.1, optimize_certificate(0.1, E_STAR))

    assert report["passed"]
    assert report["margin"] == pytest.approx(report["energy_per_volume"] - report["certificate"]["value"])


def test_lower_bound_check_errors():
    """Test the empty set and a non-neutral set."""
    cert = optimize_certificate(0.1, E_STAR)
    with pytest.raises(LdlabError) as excinfo:
        lower_bound_check(VoxelSet.empty(4.0, 4), 0.1, cert)
    assert excinfo.value.code == ErrorCode.EMPTY_SET

    with pytest.raises(LdlabError) as excinfo:
        lower_bound_check(voxelize_ball(8.0, 8, 2.0), 0.5, cert)
    assert excinfo.value.code == ErrorCode.NEUTRALITY_VIOLATION
