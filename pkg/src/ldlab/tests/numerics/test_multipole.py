"""
Tests for the Cartesian multipole expansion.
"""

import math

import numpy as np
import pytest

from ldlab.numerics.kernels import correlation_kernel, coulomb, taylor_third_order
from ldlab.numerics.multipole import (
    ball_moments, coulomb_derivatives, cuboid_moments, legendre_remainder, low_order_moments, multi_indices,
    multipole_interaction, shifted_moments,
)


def test_multi_indices_count():
    """Test that there are (k+1)(k+2)(k+3)/6 indices up to degree k."""
    for order in range(6):
        assert len(multi_indices(order)) == (order + 1) * (order + 2) * (order + 3) // 6
    assert multi_indices(1) == ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))


def test_coulomb_first_derivatives():
    """Test 1/r and its gradient on the x axis."""
    derivatives = coulomb_derivatives(np.array([[2.0, 0.0, 0.0]]), 1)[0]

    np.testing.assert_allclose(derivatives, [0.5, -0.25, 0.0, 0.0], atol=1e-15)


def test_coulomb_derivatives_are_harmonic():
    """Test that the second derivatives of 1/r have zero trace."""
    rng = np.random.default_rng(3)
    points = rng.uniform(-4.0, 4.0, size=(50, 3)) + np.array([6.0, 0.0, 0.0])
    derivatives = coulomb_derivatives(points, 2)
    indices = multi_indices(2)
    laplacian = sum(derivatives[:, indices.index(alpha)] for alpha in ((2, 0, 0), (0, 2, 0), (0, 0, 2)))

    np.testing.assert_allclose(laplacian, 0.0, atol=1e-12)


def test_balls_interact_like_point_charges():
    """Test Newton's theorem: two unit balls at distance 3 interact as point charges."""
    moments = ball_moments(1.0, 6)
    charge = 4.0 * math.pi / 3.0
    energy = multipole_interaction(moments, moments, np.array([[3.0, 0.0, 0.0], [0.0, 2.5, 1.0]]))

    np.testing.assert_allclose(energy, [charge**2 / 3.0, charge**2 / math.hypot(2.5, 1.0)], rtol=1e-10)


def test_cuboid_low_order_moments():
    """Test the charge and second moments of a centered cuboid."""
    moments = cuboid_moments((1.0, 2.0, 3.0), 2)
    q, d, P = low_order_moments(moments, 2)

    assert q == pytest.approx(6.0)
    np.testing.assert_array_equal(d, 0.0)
    assert moments[multi_indices(2).index((2, 0, 0))] == pytest.approx(0.5)
    assert np.trace(P) == pytest.approx(0.0, abs=1e-14)
    assert P[0, 0] < 0.0 < P[2, 2]


def test_shifted_moments():
    """Test that a shift keeps the charge, moves the dipole and can be undone."""
    moments = cuboid_moments((1.0, 1.5, 0.5), 4)
    shift = np.array([0.3, -0.2, 0.7])
    moved = shifted_moments(moments, shift, 4)
    q, d, _ = low_order_moments(moved, 4)

    assert q == pytest.approx(0.75)
    np.testing.assert_allclose(d, 0.75 * shift, atol=1e-14)
    np.testing.assert_allclose(shifted_moments(moved, -shift, 4), moments, atol=1e-12)


def test_distant_cubes_match_cell_kernel():
    """Test the expansion of two unit cubes against the exact cell-pair integral."""
    moments = cuboid_moments((1.0, 1.0, 1.0), 6)
    for k in ((4, 0, 0), (3, 2, 1), (5, 5, 0)):
        expansion = multipole_interaction(moments, moments, np.array([k], dtype=float))[0]
        assert expansion == pytest.approx(correlation_kernel(k), rel=1e-6)


def test_legendre_remainder_bounds_taylor_error():
    """Test that the truncated Legendre tail bounds the third-order Taylor error."""
    rng = np.random.default_rng(17)
    a = rng.normal(size=(2000, 3))
    a *= 8.0 / np.linalg.norm(a, axis=1, keepdims=True)
    b = rng.normal(size=(2000, 3))
    b *= rng.uniform(0.01, 2.0, size=(2000, 1)) / np.linalg.norm(b, axis=1, keepdims=True)
    error = np.abs(coulomb(a - b) - taylor_third_order(a, b))
    radii = np.linalg.norm(b, axis=1)

    assert np.all(error <= np.array([legendre_remainder(8.0, r) for r in radii]) * (1.0 + 1e-9))
