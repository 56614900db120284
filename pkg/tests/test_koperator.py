"""Tests for the field operator along the Legendre map."""

import numpy as np
import pytest

from ksymp import (
    DimensionMismatchError,
    FieldOperatorK,
    Grid,
    LagPoint,
    ModelError,
    ValidationError,
    default_k,
    hamiltonian_kvector_field,
    k_from_hamiltonian,
    k_from_sopde,
    k_integral_residual,
    reference_section,
    sopde_field,
    verify_k,
)
from ksymp._integrate import prolong
from ksymp._utils import random_lag_points


@pytest.fixture
def points():
    """A few fixed points of T1kQ for k=2, n=1."""
    return [LagPoint([0.5], [[1.0, 2.0]]), LagPoint([-0.3], [[0.2, 0.0]]), LagPoint([1.1], [[-0.7, 0.4]])]


class TestFieldOperatorK:
    """Tests for construction and evaluation."""

    def test_default_operator(self, harmonic):
        """Test the default gauge at one point."""
        K = default_k(harmonic)
        assert K.is_symbolic
        assert K.label == "default"
        np.testing.assert_allclose(
            K.evaluate(LagPoint([0.5], [[1.0, 2.0]])), [[1.0, -0.5, 0.0], [2.0, 0.0, -0.5]]
        )

    def test_batch_evaluation(self, harmonic):
        """Test that batches come back with the sample axis last."""
        K = default_k(harmonic)
        batch = K.evaluate_many(np.array([[0.5, 0.0], [1.0, 3.0], [2.0, 4.0]]))
        assert batch.shape == (2, 3, 2)
        np.testing.assert_allclose(batch[:, :, 1], [[3.0, 0.0, 0.0], [4.0, 0.0, 0.0]])

    def test_describe(self, harmonic):
        """Test one line per target coordinate."""
        lines = default_k(harmonic).describe()
        assert len(lines) == 6
        assert lines[0] == "K1[q1] = v1_1"
        assert lines[2] == "K1[p2_1] = 0"

    def test_exactly_one_source(self):
        """Test that components and function are mutually exclusive."""
        with pytest.raises(ValidationError):
            FieldOperatorK(2, 1)
        with pytest.raises(ValidationError):
            FieldOperatorK(2, 1, components=[["0"] * 3] * 2, function=lambda x: x)

    def test_wrong_width(self):
        """Test that rows must cover every (T1k)*Q coordinate."""
        with pytest.raises(DimensionMismatchError):
            FieldOperatorK.from_exprs(2, 1, [["0", "0"], ["0", "0"]])

    def test_momenta_not_allowed(self):
        """Test that coefficients may only depend on (q, v)."""
        with pytest.raises(ModelError, match="p1_1"):
            FieldOperatorK.from_exprs(2, 1, [["p1_1", "0", "0"], ["0", "0", "0"]])

    def test_function_backed(self):
        """Test an operator given pointwise."""
        K = FieldOperatorK.from_function(
            1, 1, lambda x: np.stack([x[1], -x[0]])[None], label="pointwise"
        )
        assert not K.is_symbolic
        np.testing.assert_allclose(K.evaluate(np.array([1.0, 2.0])), [[2.0, -1.0]])
        with pytest.raises(ValidationError):
            K.describe()
        with pytest.raises(DimensionMismatchError):
            K.evaluate(np.zeros(3))


class TestConstruction:
    """Tests for operators built from k-vector fields."""

    def test_from_sopde(self, harmonic, points):
        """Test that T(FL) of the symmetric SOPDE is the default gauge."""
        K = k_from_sopde(harmonic, sopde_field(harmonic))
        assert K.is_symbolic
        assert K.label == "T(FL)(sopde[symmetric])"
        expected = default_k(harmonic)
        for x in points:
            np.testing.assert_allclose(K.evaluate(x), expected.evaluate(x), atol=1e-12)

    def test_from_function_backed_sopde(self, quartic):
        """Test the pointwise pushforward of a SOPDE through the Jacobian of FL."""
        K = k_from_sopde(quartic, sopde_field(quartic))
        assert not K.is_symbolic
        np.testing.assert_allclose(K.evaluate(LagPoint([0.2], [[2.0]])), [[2.0, 0.0]], atol=1e-10)

    def test_from_hamiltonian(self, harmonic, points):
        """Test that composing the Hamiltonian field with FL gives the default gauge."""
        XH = hamiltonian_kvector_field(harmonic.hamiltonian, 2, 1)
        K = k_from_hamiltonian(harmonic, XH)
        assert K.label == "hamiltonian∘FL"
        assert all("p" not in str(c) for row in K.components for c in row)
        for x in points:
            np.testing.assert_allclose(K.evaluate(x), default_k(harmonic).evaluate(x), atol=1e-12)

    def test_space_checks(self, harmonic):
        """Test that fields on the wrong space are rejected."""
        XH = hamiltonian_kvector_field(harmonic.hamiltonian, 2, 1)
        with pytest.raises(DimensionMismatchError):
            k_from_sopde(harmonic, XH)
        with pytest.raises(DimensionMismatchError):
            k_from_hamiltonian(harmonic, sopde_field(harmonic))


class TestVerifyK:
    """Tests for the defining conditions of a field operator."""

    def test_default_passes(self, harmonic):
        """Test that the default gauge is a field operator for the harmonic model."""
        result = verify_k(harmonic, default_k(harmonic), random_lag_points(harmonic, 12))
        assert result.passed
        assert result.kl_residual < 1e-10
        assert result.samples_used == 12
        assert result.conditions() == {"structural": True, "field_equation": True, "second_order": True}

    def test_zero_operator_fails(self, harmonic, points):
        """Test that the zero operator fails both dynamic conditions."""
        K = FieldOperatorK.from_exprs(2, 1, [["0", "0", "0"], ["0", "0", "0"]])
        result = verify_k(harmonic, K, points)
        assert result.structural
        assert not result.field_equation
        assert not result.second_order
        assert not result.passed
        assert result.second_order_residual == pytest.approx(2.0)

    def test_singular_model(self, half_v11_squared):
        """Test the default gauge of an almost-regular model."""
        samples = random_lag_points(half_v11_squared, 8, seed=3)
        assert verify_k(half_v11_squared, default_k(half_v11_squared), samples).passed

    def test_constraint_set_filters_samples(self, half_v11_squared):
        """Test that samples off the operator's constraint set are skipped."""
        base = default_k(half_v11_squared)
        K = FieldOperatorK.from_exprs(2, 1, base.components, constraints=["v1_2"], label="on S")
        samples = [LagPoint([0.1], [[1.0, 0.0]]), LagPoint([0.2], [[-1.0, 0.0]]), LagPoint([0.3], [[1.0, 0.5]])]
        result = verify_k(half_v11_squared, K, samples)
        assert result.samples_used == 2
        assert result.samples_skipped == 1
        assert result.passed

    def test_nothing_left(self, half_v11_squared):
        """Test the report when every sample is off the constraint set."""
        base = default_k(half_v11_squared)
        K = FieldOperatorK.from_exprs(2, 1, base.components, constraints=["v1_2 - 5"])
        result = verify_k(half_v11_squared, K, [LagPoint([0.1], [[1.0, 0.0]])])
        assert result.samples_used == 0
        assert result.field_eq_residuals == ()
        assert result.passed

    def test_workers_agree(self, harmonic):
        """Test that chunked evaluation gives the same residuals."""
        samples = random_lag_points(harmonic, 9)
        serial = verify_k(harmonic, default_k(harmonic), samples)
        threaded = verify_k(harmonic, default_k(harmonic), samples, workers=3)
        assert threaded.field_eq_residuals == pytest.approx(serial.field_eq_residuals, abs=1e-14)
        assert threaded.kl_residual == pytest.approx(serial.kl_residual, abs=1e-14)

    def test_model_mismatch(self, oscillator, harmonic):
        """Test that operators of another (k, n) are rejected."""
        with pytest.raises(DimensionMismatchError):
            verify_k(oscillator, default_k(harmonic), [LagPoint([0.0], [[1.0]])])


class TestIntegralResidual:
    """Tests for integral sections of a field operator."""

    @pytest.fixture
    def plane_wave(self):
        """Prolongation of sin(t1 + t2) on [0, 0.5]^2."""
        grid = Grid.parse("t1=0:0.5:0.1,t2=0:0.5:0.1")
        return prolong(reference_section(2, 1, grid, ["sin(t1 + t2)"]))

    def test_uniform_operator(self, harmonic, plane_wave):
        """Test that the plane wave is an integral section of the uniform operator."""
        K = k_from_sopde(harmonic, sopde_field(harmonic, "uniform"))
        residual = k_integral_residual(harmonic, K, plane_wave)
        assert residual.shape == plane_wave.grid.shape + (6,)
        assert np.max(np.abs(residual)) < 1e-12

    def test_default_operator(self, harmonic, plane_wave):
        """Test that the diagonal gauge does not carry the plane wave."""
        residual = k_integral_residual(harmonic, default_k(harmonic), plane_wave)
        assert np.max(np.abs(residual)) > 0.1

    def test_needs_lagrangian_section(self, harmonic):
        """Test that a section over Q is rejected."""
        grid = Grid.parse("t1=0:0.5:0.1,t2=0:0.5:0.1")
        with pytest.raises(DimensionMismatchError):
            k_integral_residual(harmonic, default_k(harmonic), reference_section(2, 1, grid, ["t1"]))
