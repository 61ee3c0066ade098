"""
Tests for position grids and the summation curve.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gwp_transform.core.errors import (
    IndexOutOfRangeError,
    InvalidGeometryError,
    InvalidParameterError,
)
from gwp_transform.core.gaussian import imaginary_width, validate_width
from gwp_transform.summation import (
    SummationCurve,
    bound_lower,
    bound_upper,
    eigh_aligned,
    finite_grid,
    gamma_q_constant,
    lattice_grid,
    partition_weight,
    partition_weights,
    spectral_bound,
    summation_direct,
    summation_expansion,
    summation_product,
    summation_riemann_weight,
)


@pytest.fixture
def unit_width():
    return imaginary_width(1.0)


@pytest.fixture
def lattice_curve(unit_width):
    return SummationCurve(lattice_grid(unit_width, [0.0], 0.5), unit_width, 1.0)


@pytest.fixture
def rotated_width():
    angle = math.pi / 4
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    return imaginary_width(R @ np.diag([1.0, 4.0]) @ R.T)


class TestPositionGrid:
    """Test grid construction and indexing."""

    def test_finite_offsets(self, unit_width):
        grid = finite_grid(unit_width, [0.0], 1.0, 4)
        assert grid.dq == pytest.approx(0.5)
        assert_allclose(grid.offsets_1d(), [-0.75, -0.25, 0.25, 0.75])
        assert len(grid) == 4

    def test_single_point_grid(self, unit_width):
        grid = finite_grid(unit_width, [0.3], 2.0, 1)
        assert_allclose(grid.points(), [[0.3]])

    def test_point_matches_points(self, rotated_width):
        grid = finite_grid(rotated_width, [0.5, -0.5], 2.0, 3)
        points = grid.points()
        for row, k in enumerate(grid.indices()):
            assert_allclose(grid.point(k), points[row], atol=1e-15)

    def test_index_out_of_range(self, unit_width):
        grid = finite_grid(unit_width, [0.0], 1.0, 4)
        with pytest.raises(IndexOutOfRangeError):
            grid.point([5])
        with pytest.raises(IndexOutOfRangeError):
            grid.point([0])

    def test_lattice_point(self, unit_width):
        grid = lattice_grid(unit_width, [1.0], 0.5)
        assert_allclose(grid.point([-3]), [-0.5])
        with pytest.raises(TypeError):
            len(grid)

    def test_invalid_parameters(self, unit_width):
        with pytest.raises(InvalidParameterError):
            finite_grid(unit_width, [0.0], 0.0, 4)
        with pytest.raises(InvalidParameterError):
            finite_grid(unit_width, [0.0], 1.0, 0)
        with pytest.raises(InvalidParameterError):
            lattice_grid(unit_width, [0.0], -1.0)

    def test_eigenvectors_signed(self, rotated_width):
        lambdas, U = eigh_aligned(rotated_width.imag)
        assert_allclose(lambdas, [1.0, 4.0], rtol=1e-12)
        assert_allclose(U @ np.diag(lambdas) @ U.T, rotated_width.imag, atol=1e-12)
        for column in U.T:
            first = column[np.flatnonzero(np.abs(column) > 1e-14)[0]]
            assert first > 0


class TestSummationCurve:
    """Test S(x) on lattices and finite grids."""

    def test_single_point_grid_peak(self, unit_width):
        curve = SummationCurve(finite_grid(unit_width, [0.0], 1.0, 1), unit_width, 1.0)
        assert summation_direct(curve, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)

    def test_lattice_is_nearly_constant(self, lattice_curve):
        x = np.linspace(-1.0, 1.0, 41)
        assert_allclose(summation_direct(lattice_curve, x), 2.0, atol=1e-14)

    def test_lattice_periodicity(self, unit_width):
        curve = SummationCurve(lattice_grid(unit_width, [0.0], 2.0), unit_width, 1.0)
        x = np.linspace(-1.0, 1.0, 17)
        assert_allclose(summation_direct(curve, x + 2.0), summation_direct(curve, x), rtol=1e-13)

    def test_positive_on_box(self, unit_width):
        curve = SummationCurve(finite_grid(unit_width, [0.0], 4.0, 8), unit_width, 0.5)
        assert np.all(summation_direct(curve, np.linspace(-4.0, 4.0, 201)) > 0)

    def test_scalar_and_batch(self, lattice_curve):
        assert isinstance(summation_direct(lattice_curve, 0.1), float)
        assert summation_direct(lattice_curve, np.array([0.1, 0.2])).shape == (2,)


class TestSummationExpansion:
    """Test the cosine series of the lattice curve."""

    def test_zero_terms(self):
        assert summation_expansion(0.5, 1.0, 1.0, 0.3, 0) == pytest.approx(2.0)

    def test_agrees_with_direct(self, unit_width):
        dq = 1.0
        curve = SummationCurve(lattice_grid(unit_width, [0.0], dq), unit_width, 1.0)
        x = np.linspace(-1.5, 1.5, 31)
        assert_allclose(
            summation_expansion(dq, 1.0, 1.0, x, 8), summation_direct(curve, x), atol=1e-14
        )

    def test_negative_terms(self):
        with pytest.raises(InvalidParameterError):
            summation_expansion(0.5, 1.0, 1.0, 0.0, -1)


class TestSpectralBound:
    """Test the lattice deviation bound |S - 1/dq|."""

    def test_values(self):
        assert spectral_bound(1, 1.0, 1.0, 1.0) == pytest.approx(2 / math.pi**2)
        assert spectral_bound(2, 1.0, 1.0, 1.0) == pytest.approx(4 / math.pi**4)

    @pytest.mark.parametrize("dq", [0.5, 1.0, 2.0])
    def test_bounds_deviation(self, unit_width, dq):
        curve = SummationCurve(lattice_grid(unit_width, [0.0], dq), unit_width, 1.0)
        x = np.linspace(-dq, dq, 101)
        deviation = np.max(np.abs(summation_direct(curve, x) - 1 / dq))
        for s in (1, 2, 3):
            assert deviation <= spectral_bound(s, dq, 1.0, 1.0) + 1e-15

    def test_convergence_accelerates_as_spacing_halves(self):
        width = imaginary_width(16.0)
        deviations = []
        for dq in (1.0, 0.5, 0.25):
            curve = SummationCurve(lattice_grid(width, [0.0], dq), width, 1.0)
            x = np.linspace(0.0, dq, 101)
            deviations.append(np.max(np.abs(summation_direct(curve, x) - 1 / dq)))
        slopes = [math.log2(a / b) for a, b in zip(deviations, deviations[1:])]
        assert deviations[-1] > 1e-6
        assert slopes[1] > slopes[0] > 0

    def test_narrow_basis_oscillates(self):
        x = np.linspace(-4.0, 4.0, 1601)
        spread = {}
        for gamma in (2.0, 8.0):
            width = imaginary_width(gamma)
            curve = SummationCurve(finite_grid(width, [0.0], 8.0, 32), width, 1.0)
            values = summation_direct(curve, x)
            spread[gamma] = values.max() - values.min()
        assert spread[2.0] < spectral_bound(1, 0.5, 2.0, 1.0)
        assert spread[8.0] > 100 * spread[2.0]

    def test_invalid_order(self):
        with pytest.raises(InvalidParameterError):
            spectral_bound(0, 1.0, 1.0, 1.0)


class TestPartitionOfUnity:
    """Test the weights chi_k = |g_0(x - q_k)|^2 / S(x)."""

    def test_finite_grid_sums_to_one(self, rotated_width):
        curve = SummationCurve(finite_grid(rotated_width, [0.0, 0.0], 2.0, 6), rotated_width, 0.5)
        x = np.random.default_rng(0).uniform(-2.0, 2.0, (50, 2))
        weights = partition_weights(curve, x)
        assert np.all(weights >= 0)
        assert_allclose(weights.sum(axis=1), 1.0, rtol=1e-13)

    def test_single_weight(self, unit_width):
        curve = SummationCurve(finite_grid(unit_width, [0.0], 1.0, 4), unit_width, 1.0)
        weights = partition_weights(curve, np.array([0.1, 0.6]))
        assert_allclose(partition_weight(curve, [2], np.array([0.1, 0.6])), weights[:, 1], rtol=1e-13)

    def test_lattice_terms_sum_to_one(self, lattice_curve):
        x = np.linspace(-1.0, 1.0, 11)
        total = np.zeros_like(x)
        for rows, terms in lattice_curve.squared_terms(x):
            total[rows] = terms.sum(axis=1) / lattice_curve(x[rows])
        assert_allclose(total, 1.0, rtol=1e-13)

    def test_lattice_not_enumerated(self, lattice_curve):
        with pytest.raises(InvalidGeometryError):
            partition_weights(lattice_curve, [0.0])


class TestSummationProduct:
    """Test the product form along the eigenvectors of Im C."""

    def test_diagonal(self):
        width = imaginary_width(np.diag([1.0, 3.0]))
        curve = SummationCurve(finite_grid(width, [0.2, -0.1], 3.0, 12), width, 0.7)
        x = np.random.default_rng(1).uniform(-3.0, 3.0, (40, 2))
        assert_allclose(summation_product(curve, x), summation_direct(curve, x), rtol=1e-12)

    def test_rotated(self, rotated_width):
        curve = SummationCurve(finite_grid(rotated_width, [0.0, 0.0], 4.0, 16), rotated_width, 1.0)
        x = np.random.default_rng(2).uniform(-4.0, 4.0, (40, 2))
        assert_allclose(summation_product(curve, x), summation_direct(curve, x), rtol=1e-12)

    def test_rotated_lattice(self, rotated_width):
        curve = SummationCurve(lattice_grid(rotated_width, [0.0, 0.0], 0.5), rotated_width, 1.0)
        x = np.random.default_rng(3).uniform(-1.0, 1.0, (10, 2))
        assert_allclose(summation_product(curve, x), summation_direct(curve, x), rtol=1e-12)

    def test_complex_real_part_ignored(self):
        width = validate_width([[0.8 + 1j]])
        curve = SummationCurve(finite_grid(width, [0.0], 2.0, 8), width, 1.0)
        reference = SummationCurve(finite_grid(imaginary_width(1.0), [0.0], 2.0, 8), imaginary_width(1.0), 1.0)
        x = np.linspace(-2.0, 2.0, 9)
        assert_allclose(summation_direct(curve, x), summation_direct(reference, x))


class TestBounds:
    """Test the one-dimensional upper and lower bounds."""

    def test_upper_value(self):
        assert bound_upper(0.5, 1.0, 1.0) == pytest.approx(4.51669, rel=1e-5)

    def test_lower_value(self):
        assert bound_lower(0.5, 1.0, 1.0, 8.0) == pytest.approx(0.4795, rel=1e-3)

    def test_lower_bounds_curve(self, unit_width):
        L_q, M = 4.0, 16
        grid = finite_grid(unit_width, [0.0], L_q, M)
        curve = SummationCurve(grid, unit_width, 1.0)
        x = np.linspace(-L_q, L_q, 401)
        assert np.min(summation_direct(curve, x)) >= bound_lower(grid.dq, 1.0, 1.0, L_q)

    def test_upper_bounds_absolute_sum(self, unit_width):
        dq = 0.5
        grid = lattice_grid(unit_width, [0.0], dq)
        x = np.linspace(-dq, dq, 21)
        k = np.arange(-60, 61)
        total = (math.pi ** -0.25 * np.exp(-((x[:, None] - k[None, :] * dq) ** 2) / 2)).sum(axis=1)
        assert np.max(total) <= bound_upper(dq, 1.0, 1.0)
        assert grid.point([1])[0] == pytest.approx(dq)

    def test_invalid_geometry(self):
        with pytest.raises(InvalidGeometryError):
            bound_lower(2.0, 1.0, 1.0, 1.0)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            bound_upper(0.0, 1.0, 1.0)

    def test_gamma_q_constant(self):
        limit = gamma_q_constant(1.0, 1.0, 8.0)
        assert limit == pytest.approx(2 * math.sqrt(2) * math.pi**0.25, rel=1e-12)
        assert gamma_q_constant(1.0, 1.0, 8.0, dq=0.5) >= limit

    def test_riemann_weight(self, rotated_width):
        grid = finite_grid(rotated_width, [0.0, 0.0], 2.0, 8)
        assert summation_riemann_weight(grid) == pytest.approx(0.25)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
