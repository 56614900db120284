"""Tests for the Hamiltonian side: HDW residuals, Legendre inversion and pushforwards."""

import numpy as np
import pytest

from ksymp import (
    ConstraintViolationError,
    DimensionMismatchError,
    Grid,
    HamPoint,
    ImplicitHamiltonian,
    KVectorField,
    LagPoint,
    NonConvergenceError,
    SingularHessianError,
    ValidationError,
    ham_geoeq_residual,
    hamiltonian_kvector_field,
    hdw_residual,
    invert_legendre,
    legendre,
    pushforward_field,
    pushforward_XH,
    restricted_ham_residual,
    sopde_field,
)
from ksymp._integrate import section_from_functions

HARMONIC_H = "0.5*(p1_1^2 + p2_1^2) + q1^2"


def plane_wave(grid):
    """(sin s, cos s, cos s) with s = t1 + t2 and its exact derivatives."""

    def values(t):
        s = t[0] + t[1]
        return np.stack([np.sin(s), np.cos(s), np.cos(s)])

    def first(t):
        s = t[0] + t[1]
        row = np.stack([np.cos(s), -np.sin(s), -np.sin(s)])
        return np.stack([row, row])

    return section_from_functions("hamiltonian", 2, 1, grid, values, first)


class TestHdwResidual:
    """Tests for the Hamilton-De Donder-Weyl residual."""

    def test_plane_wave(self):
        """Test that the Hamiltonian plane wave solves the HDW equations."""
        grid = Grid.parse("t1=0:1:0.1,t2=0:1:0.1")
        residual = hdw_residual(HARMONIC_H, plane_wave(grid))
        assert residual.shape == grid.shape + (3,)
        assert np.max(np.abs(residual)) < 1e-12

    def test_wrong_hamiltonian(self):
        """Test that another potential leaves the q-row residual sin(s)."""
        grid = Grid.parse("t1=0:1:0.1,t2=0:1:0.1")
        residual = hdw_residual("0.5*(p1_1^2 + p2_1^2) + 0.5*q1^2", plane_wave(grid))
        mesh = grid.mesh()
        np.testing.assert_allclose(residual[..., 0], -np.sin(mesh[0] + mesh[1]), atol=1e-12)
        assert np.max(np.abs(residual[..., 1:])) < 1e-12

    def test_wrong_space(self, harmonic):
        """Test that a section over Q is rejected."""
        from ksymp import reference_section

        phi = reference_section(2, 1, Grid.parse("t1=0:1:0.5,t2=0:1:0.5"), ["t1"])
        with pytest.raises(DimensionMismatchError):
            hdw_residual(HARMONIC_H, phi)

    def test_stray_variable(self):
        """Test that velocities may not appear in a Hamiltonian."""
        grid = Grid.parse("t1=0:1:0.5,t2=0:1:0.5")
        with pytest.raises(ValidationError, match="v1_1"):
            hdw_residual("v1_1^2", plane_wave(grid))


class TestHamiltonianField:
    """Tests for the diagonal-gauge Hamiltonian k-vector field."""

    def test_components(self):
        """Test the symbolic components for the harmonic Hamiltonian."""
        X = hamiltonian_kvector_field(HARMONIC_H, 2, 1)
        assert X.space == "hamiltonian"
        lines = X.describe()
        assert "X1[q1] = p1_1" in lines
        assert "X1[p1_1] = -q1" in lines
        assert "X2[q1] = p2_1" in lines
        assert "X2[p2_1] = -q1" in lines
        assert len(lines) == 4

    def test_solves_geometric_equation(self):
        """Test that the field solves the Hamiltonian geometric equation."""
        X = hamiltonian_kvector_field(HARMONIC_H, 2, 1)
        for y in (HamPoint([0.5], [[1.0], [2.0]]), HamPoint([-2.0], [[0.0], [0.7]])):
            assert np.max(np.abs(ham_geoeq_residual(HARMONIC_H, X, y))) < 1e-12

    def test_wrong_field_leaves_residual(self):
        """Test that the zero field leaves -dH as residual."""
        from ksymp._kvector import zero_field

        y = HamPoint([0.5], [[1.0], [2.0]])
        residual = ham_geoeq_residual(HARMONIC_H, zero_field("hamiltonian", 2, 1), y)
        np.testing.assert_allclose(residual, [-1.0, -1.0, -2.0], atol=1e-12)


class TestInvertLegendre:
    """Tests for Newton inversion of the Legendre map."""

    def test_linear_momenta(self, harmonic):
        """Test inversion when p = v."""
        x = invert_legendre(harmonic, HamPoint([0.3], [[1.0], [2.0]]))
        np.testing.assert_allclose(x.q, [0.3])
        np.testing.assert_allclose(x.v, [[1.0, 2.0]], atol=1e-10)

    def test_cubic_momenta(self, quartic):
        """Test inversion of p = v^3 from a nonsingular guess."""
        x = invert_legendre(quartic, HamPoint([0.0], [[8.0]]), guess=LagPoint([0.0], [[1.0]]))
        np.testing.assert_allclose(x.v, [[2.0]], atol=1e-8)
        np.testing.assert_allclose(legendre(quartic, x).p, [[8.0]], atol=1e-8)

    def test_singular_start(self, quartic):
        """Test that a vanishing Hessian stops the iteration."""
        with pytest.raises(SingularHessianError) as info:
            invert_legendre(quartic, HamPoint([0.0], [[8.0]]))
        assert info.value.iterations == 0
        assert isinstance(info.value, NonConvergenceError)

    def test_allow_singular(self, half_v11_squared):
        """Test that minimum-norm steps find a preimage on a singular fibre."""
        y = HamPoint([0.1], [[1.5], [0.0]])
        with pytest.raises(SingularHessianError):
            invert_legendre(half_v11_squared, y)
        x = invert_legendre(half_v11_squared, y, allow_singular=True)
        np.testing.assert_allclose(x.v, [[1.5, 0.0]], atol=1e-10)

    def test_iteration_cap(self, quartic):
        """Test that too few iterations raise NonConvergenceError."""
        with pytest.raises(NonConvergenceError):
            invert_legendre(
                quartic, HamPoint([0.0], [[1000.0]]), guess=LagPoint([0.0], [[1.0]]), max_iter=2
            )

    def test_dimension_mismatch(self, harmonic):
        """Test that points of another model are rejected."""
        with pytest.raises(DimensionMismatchError):
            invert_legendre(harmonic, HamPoint([0.0], [[1.0]]))


class TestImplicitHamiltonian:
    """Tests for H evaluated through the inverse Legendre map."""

    def test_value_and_gradient(self, harmonic):
        """Test H and dH for the harmonic model against the closed form."""
        H = ImplicitHamiltonian(harmonic)
        y = HamPoint([0.3], [[1.0], [2.0]])
        assert H.value(y) == pytest.approx(2.59)
        assert H(y) == pytest.approx(2.59)
        np.testing.assert_allclose(H.gradient(y), [0.6, 1.0, 2.0], atol=1e-5)


class TestPushforward:
    """Tests for pushing SOPDEs forward to the momentum phase space."""

    def test_matches_hamiltonian_field(self, harmonic):
        """Test that FL_* of the symmetric SOPDE is the diagonal Hamiltonian field."""
        XL = sopde_field(harmonic)
        XH = hamiltonian_kvector_field(HARMONIC_H, 2, 1)
        y = HamPoint([0.3], [[1.0], [2.0]])
        np.testing.assert_allclose(pushforward_XH(harmonic, XL, y), XH.evaluate(y), atol=1e-10)

    def test_pushforward_field(self, harmonic):
        """Test the pointwise pushforward field on a batch."""
        X = pushforward_field(harmonic, sopde_field(harmonic, "uniform"))
        assert X.label == "FL*sopde[uniform]"
        batch = X.evaluate_many(np.array([[0.3, 0.0], [1.0, 0.5], [2.0, 0.5]]))
        assert batch.shape == (2, 3, 2)
        np.testing.assert_allclose(batch[:, :, 0], [[1.0, -0.3, -0.3], [2.0, -0.3, -0.3]], atol=1e-10)

    def test_needs_lagrangian_field(self, harmonic):
        """Test that a Hamiltonian field cannot be pushed forward."""
        XH = hamiltonian_kvector_field(HARMONIC_H, 2, 1)
        with pytest.raises(DimensionMismatchError):
            pushforward_XH(harmonic, XH, HamPoint([0.3], [[1.0], [2.0]]))


class TestRestrictedResidual:
    """Tests for the HDW equation restricted to a constraint set."""

    @pytest.fixture
    def candidate(self):
        """Field that solves the restricted but not the full equation."""
        return KVectorField.from_exprs("hamiltonian", 2, 1, [["p1_1", "0", "0"], ["1", "0", "0"]])

    def test_tangent_projection(self, half_v11_squared, candidate):
        """Test that the normal part of the residual is projected away."""
        y = HamPoint([0.2], [[1.5], [0.0]])
        full = ham_geoeq_residual("0.5*p1_1^2", candidate, y)
        np.testing.assert_allclose(full, [0.0, 0.0, 1.0], atol=1e-12)
        result = restricted_ham_residual(
            half_v11_squared, half_v11_squared.constraints, candidate, y
        )
        assert result.tangent_basis.shape == (3, 2)
        assert result.constraint_rank == 1
        assert not result.rank_deficient
        assert result.max_residual < 1e-12

    def test_off_constraint(self, half_v11_squared, candidate):
        """Test that a point off the constraint set is rejected."""
        with pytest.raises(ConstraintViolationError):
            restricted_ham_residual(
                half_v11_squared, ["p2_1"], candidate, HamPoint([0.2], [[1.5], [0.5]])
            )

    def test_missing_hamiltonian(self, free_field, candidate):
        """Test that a model without a Hamiltonian needs one passed in."""
        y = HamPoint([0.2], [[1.5], [0.0]])
        with pytest.raises(ValidationError, match="no Hamiltonian"):
            restricted_ham_residual(free_field, ["p2_1"], candidate, y)
        result = restricted_ham_residual(
            free_field, ["p2_1"], candidate, y, hamiltonian="0.5*p1_1^2"
        )
        assert result.max_residual < 1e-12

    def test_constraints_in_velocities(self, half_v11_squared, candidate):
        """Test that constraints must be written in (q, p)."""
        with pytest.raises(ValidationError):
            restricted_ham_residual(
                half_v11_squared, ["v1_2"], candidate, HamPoint([0.2], [[1.5], [0.0]])
            )
