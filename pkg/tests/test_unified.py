"""Tests for the unified formalism on the Whitney sum."""

import numpy as np
import pytest

from ksymp import (
    ConstraintViolationError,
    DimensionMismatchError,
    KVectorField,
    LagPoint,
    NotSopdeError,
    NotTangentError,
    UnifiedPoint,
    ValidationError,
    constraint_algorithm,
    coupling,
    graph_point,
    graph_pullback_residual,
    graph_samples,
    lift_from_lagrangian,
    omega_kernel_basis,
    project_to_lagrangian,
    sopde_field,
    sr_solve,
    tangency_residual,
    unified_hamiltonian,
    unified_residual,
)
from ksymp._unified import graph_constraints, graph_residual, unified_differential


@pytest.fixture
def off_graph():
    """Harmonic point whose momenta differ from the velocities."""
    return UnifiedPoint([0.5], [[1.0, 2.0]], [[3.0], [4.0]])


@pytest.fixture
def on_graph(harmonic):
    """Harmonic point on the graph of FL."""
    return graph_point(harmonic, LagPoint([0.5], [[1.0, 2.0]]))


class TestUnifiedFunctions:
    """Tests for the coupling, the unified Hamiltonian and its differential."""

    def test_coupling(self, harmonic, off_graph):
        """Test the pairing of momenta with velocities."""
        assert coupling(harmonic, off_graph) == pytest.approx(11.0)

    def test_unified_hamiltonian(self, harmonic, off_graph):
        """Test coupling minus the Lagrangian."""
        assert unified_hamiltonian(harmonic, off_graph) == pytest.approx(8.75)

    def test_on_graph_equals_energy(self, harmonic, on_graph):
        """Test that the unified Hamiltonian restricts to the Lagrangian energy."""
        assert unified_hamiltonian(harmonic, on_graph) == pytest.approx(2.75)

    def test_differential(self, harmonic, off_graph):
        """Test d of the unified Hamiltonian in (q, v, p) order."""
        np.testing.assert_allclose(unified_differential(harmonic, off_graph), [1.0, 2.0, 2.0, 1.0, 2.0])

    def test_array_shape_checked(self, harmonic):
        """Test that raw arrays of the wrong length are rejected."""
        with pytest.raises(DimensionMismatchError):
            unified_differential(harmonic, np.zeros(3))


class TestGraph:
    """Tests for the graph of the Legendre map."""

    def test_graph_point(self, harmonic, on_graph):
        """Test that the graph point carries p = v for the harmonic model."""
        np.testing.assert_allclose(on_graph.p, [[1.0], [2.0]])
        np.testing.assert_allclose(graph_residual(harmonic, on_graph), [0.0, 0.0])

    def test_graph_residual(self, harmonic, off_graph):
        """Test the momentum mismatch off the graph."""
        np.testing.assert_allclose(graph_residual(harmonic, off_graph), [2.0, 2.0])

    def test_graph_constraints(self, half_v11_squared):
        """Test the graph constraints of a singular model."""
        constraints = graph_constraints(half_v11_squared)
        assert str(constraints[1]) == "p2_1"
        assert len(constraints) == 2

    def test_seeded_samples(self, harmonic):
        """Test that graph samples are reproducible and lie on the graph."""
        first = graph_samples(harmonic, 4, seed=7)
        second = graph_samples(harmonic, 4, seed=7)
        assert len(first) == 4
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.to_array(), b.to_array())
            assert np.max(np.abs(graph_residual(harmonic, a))) < 1e-12

    def test_pullback_matches_lagrangian_forms(self, harmonic, half_v11_squared):
        """Test that the unified two-forms pull back to the Lagrangian ones."""
        assert graph_pullback_residual(harmonic, LagPoint([0.5], [[1.0, 2.0]])).passed
        assert graph_pullback_residual(half_v11_squared, LagPoint([0.5], [[1.0, 0.0]])).passed


class TestUnifiedEquation:
    """Tests for pointwise solutions of the unified equation."""

    def test_solution_on_graph(self, harmonic, on_graph):
        """Test that a graph point admits a tangent solution."""
        solution = sr_solve(harmonic, on_graph)
        assert solution.feasible
        assert solution.ansatz == "symmetric"
        assert solution.components.shape == (2, 5)
        assert solution.tangency < 1e-10
        assert np.max(np.abs(unified_residual(harmonic, solution.components, on_graph))) < 1e-10

    def test_no_solution_off_graph(self, harmonic, off_graph):
        """Test that infeasibility off the graph is reported, not raised."""
        solution = sr_solve(harmonic, off_graph)
        assert not solution.feasible
        assert solution.components is None
        assert np.isnan(solution.tangency)
        np.testing.assert_allclose(solution.graph_residual, [2.0, 2.0])

    def test_kernel_dimension(self, harmonic, on_graph):
        """Test the kernel of the contraction with the unified forms."""
        assert omega_kernel_basis(harmonic, on_graph).shape == (10, 7)

    def test_coefficient_shape_checked(self, harmonic, on_graph):
        """Test that coefficients of the wrong shape are rejected."""
        with pytest.raises(DimensionMismatchError):
            unified_residual(harmonic, np.zeros((2, 3)), on_graph)


class TestLiftAndProject:
    """Tests for moving fields between T1kQ and the Whitney sum."""

    def test_lift_is_tangent(self, harmonic, on_graph):
        """Test that lifting a SOPDE gives a field tangent to the graph."""
        Z = lift_from_lagrangian(harmonic, sopde_field(harmonic))
        assert Z.space == "unified"
        assert Z.is_symbolic
        assert Z.label == "lift(sopde[symmetric])"
        assert np.max(np.abs(tangency_residual(harmonic, Z, on_graph))) < 1e-12

    def test_lift_solves_unified_equation(self, harmonic):
        """Test the lifted SOPDE against the unified equation on graph samples."""
        Z = lift_from_lagrangian(harmonic, sopde_field(harmonic, "uniform"))
        for w in graph_samples(harmonic, 5):
            assert np.max(np.abs(unified_residual(harmonic, Z, w))) < 1e-10

    def test_function_backed_lift(self, quartic):
        """Test the pointwise lift of a SOPDE with non-constant Hessian."""
        x = LagPoint([0.2], [[1.0]])
        Z = lift_from_lagrangian(quartic, sopde_field(quartic), samples=[x])
        assert not Z.is_symbolic
        w = graph_point(quartic, x)
        assert np.max(np.abs(tangency_residual(quartic, Z, w))) < 1e-10

    def test_round_trip(self, harmonic):
        """Test that projecting a lifted SOPDE recovers it."""
        XL = sopde_field(harmonic)
        points = [LagPoint([0.5], [[1.0, 2.0]]), LagPoint([-0.3], [[0.2, 0.0]])]
        Z = lift_from_lagrangian(harmonic, XL, samples=points)
        back = project_to_lagrangian(harmonic, Z, points)
        assert back.label == "pr(lift(sopde[symmetric]))"
        for x in points:
            np.testing.assert_allclose(back.evaluate(x), XL.evaluate(x), atol=1e-12)

    def test_lift_rejects_non_sopde(self, harmonic):
        """Test that only second-order fields can be lifted."""
        X = KVectorField.from_exprs("lagrangian", 2, 1, [["0", "0", "0"], ["0", "0", "0"]])
        with pytest.raises(NotSopdeError):
            lift_from_lagrangian(harmonic, X)

    def test_project_rejects_non_tangent(self, harmonic):
        """Test that a field leaving the graph cannot be projected."""
        Z = KVectorField.from_exprs(
            "unified", 2, 1, [["v1_1", "0", "0", "1", "0"], ["v1_2", "0", "0", "0", "0"]]
        )
        with pytest.raises(NotTangentError):
            project_to_lagrangian(harmonic, Z, [LagPoint([0.5], [[1.0, 2.0]])])
        with pytest.raises(ValidationError):
            project_to_lagrangian(harmonic, Z, [])


class TestConstraintAlgorithm:
    """Tests for the constraint algorithm on the graph of FL."""

    def test_regular_model(self, harmonic):
        """Test that a regular model stabilizes immediately."""
        report = constraint_algorithm(harmonic, graph_samples(harmonic, 6))
        assert report.stabilized
        assert report.final_level == 0
        assert report.levels[0].new_count == 0
        assert report.dimension == 3

    def test_almost_regular_model(self, half_v11_squared):
        """Test that v1_1^2/2 needs no constraints beyond the graph."""
        report = constraint_algorithm(half_v11_squared, graph_samples(half_v11_squared, 6))
        assert report.stabilized
        assert report.final_level == 0
        assert report.dimension == 3
        assert report.levels[0].symbolic

    def test_secondary_constraints(self, secondary):
        """Test that q1*q2 forces a chain of constraints down to a point."""
        report = constraint_algorithm(secondary, graph_samples(secondary, 5))
        assert report.stabilized
        assert report.final_level == 4
        assert len(report.final_constraints) == 6
        assert report.dimension == 0
        assert not report.exceeds_k
        for w in report.samples:
            np.testing.assert_allclose(w.to_array(), np.zeros(6), atol=1e-8)
        document = report.to_document()
        assert document["final_level"] == 4
        assert len(document["levels"]) == 5

    def test_level_cap(self, secondary):
        """Test that the loop stops unstabilized at the level cap."""
        report = constraint_algorithm(secondary, graph_samples(secondary, 5), max_levels=1)
        assert not report.stabilized
        assert report.final_level == 1
        assert report.derived_relations == ()

    def test_workers_agree(self, secondary):
        """Test that threaded per-sample solves give the same report."""
        samples = graph_samples(secondary, 5)
        serial = constraint_algorithm(secondary, samples)
        threaded = constraint_algorithm(secondary, samples, workers=3)
        assert serial.to_document() == threaded.to_document()

    def test_every_sample_dropped(self):
        """Test that losing every sample leaves the run unstabilized."""
        from ksymp import FieldModel

        # tangency to p1_1 = q1^2 fails by the constant force term everywhere
        m = FieldModel.from_text(1, 1, "q1^2*v1_1 - q1", name="drift")
        report = constraint_algorithm(m, graph_samples(m, 4))
        assert not report.levels[0].symbolic
        assert report.levels[0].dropped == 4
        assert report.levels[0].new_count == 0
        assert not report.stabilized
        assert report.final_level == 0
        assert report.derived_relations == ()

    def test_needs_samples(self, harmonic):
        """Test that an empty sample set is rejected."""
        with pytest.raises(ValidationError):
            constraint_algorithm(harmonic, [])

    def test_off_graph_sample(self, harmonic, off_graph):
        """Test that samples must lie on the graph of FL."""
        with pytest.raises(ConstraintViolationError):
            constraint_algorithm(harmonic, [off_graph])
