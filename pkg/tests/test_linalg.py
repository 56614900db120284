"""Tests for the rank-revealing linear algebra helpers."""

import numpy as np
import pytest

from ksymp._linalg import (
    batched_min_norm_solve,
    clean_coefficient,
    left_null_space,
    min_norm_solve,
    null_space,
    numeric_rank,
    rref,
)


class TestMinNormSolve:
    """Tests for min_norm_solve."""

    def test_square_regular(self):
        """Test a regular square system."""
        a = np.array([[2.0, 0.0], [0.0, 4.0]])
        result = min_norm_solve(a, np.array([2.0, 2.0]))
        assert result.solution == pytest.approx([1.0, 0.5])
        assert result.rank == 2
        assert result.residual < 1e-14

    def test_underdetermined_minimum_norm(self):
        """Test that x1 + x2 = 2 gives the minimum-norm solution (1, 1)."""
        result = min_norm_solve(np.array([[1.0, 1.0]]), np.array([2.0]))
        assert result.solution == pytest.approx([1.0, 1.0])
        assert result.rank == 1

    def test_inconsistent_residual(self):
        """Test that an inconsistent system reports its residual."""
        a = np.array([[1.0], [1.0]])
        result = min_norm_solve(a, np.array([0.0, 2.0]))
        assert result.solution == pytest.approx([1.0])
        assert result.residual == pytest.approx(1.0)

    def test_empty_system(self):
        """Test the degenerate shapes."""
        result = min_norm_solve(np.zeros((0, 3)), np.zeros(0))
        assert result.solution.shape == (3,)
        assert result.rank == 0
        assert result.residual == 0.0

    def test_batched_matches_single(self, rng):
        """Test that the batched solver agrees with one-at-a-time solves."""
        a = rng.normal(size=(5, 2, 4))
        b = rng.normal(size=(5, 2))
        batched = batched_min_norm_solve(a, b)
        for j in range(5):
            assert batched[j] == pytest.approx(min_norm_solve(a[j], b[j]).solution, abs=1e-10)


class TestNullSpaces:
    """Tests for kernel computations."""

    def test_null_space_basis(self):
        """Test that the kernel of a rank-1 matrix is two-dimensional and orthonormal."""
        a = np.array([[1.0, 1.0, 1.0]])
        basis = null_space(a)
        assert basis.shape == (3, 2)
        assert np.allclose(a @ basis, 0.0)
        assert np.allclose(basis.T @ basis, np.eye(2))

    def test_null_space_of_empty_rows(self):
        """Test that a matrix with no rows has the whole space as kernel."""
        assert np.array_equal(null_space(np.zeros((0, 3))), np.eye(3))

    def test_left_null_space(self):
        """Test that the left kernel annihilates the columns."""
        a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        y = left_null_space(a)
        assert y.shape == (3, 1)
        assert np.allclose(y.T @ a, 0.0)

    def test_numeric_rank(self):
        """Test the absolute singular-value cutoff."""
        a = np.diag([1.0, 1e-9, 0.0])
        assert numeric_rank(a, 1e-8) == 1
        assert numeric_rank(a, 1e-12) == 2
        assert numeric_rank(np.zeros((0, 0)), 1e-8) == 0


class TestRref:
    """Tests for the row-echelon helper."""

    def test_pivots_and_rows(self):
        """Test a rank-2 matrix."""
        a = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 7.0], [3.0, 6.0, 10.0]])
        rows, pivots = rref(a)
        assert pivots == (0, 2)
        assert rows == pytest.approx(np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]]))

    def test_zero_matrix(self):
        """Test that a zero matrix has no pivot rows."""
        rows, pivots = rref(np.zeros((2, 3)))
        assert rows.shape == (0, 3)
        assert pivots == ()


class TestCleanCoefficient:
    """Tests for clean_coefficient."""

    @pytest.mark.parametrize(
        ("value", "expected"),
        [
            (0.49999999999999994, 0.5),
            (1.0000000000001, 1.0),
            (-0.33333333333333337, -1 / 3),
            (0.0, 0.0),
        ],
    )
    def test_snaps_near_fractions(self, value, expected):
        """Test snapping to small-denominator fractions."""
        assert clean_coefficient(value) == expected

    def test_keeps_generic_values(self):
        """Test that values far from any small fraction are kept."""
        assert clean_coefficient(0.123456789) == 0.123456789

    def test_non_finite(self):
        """Test that non-finite values pass through."""
        assert np.isnan(clean_coefficient(float("nan")))
