"""Tests for the end-to-end equivalence reports."""

import math

import pytest

from ksymp import (
    EquivalenceReport,
    Grid,
    LagPoint,
    Stage,
    ToolkitOptions,
    ValidationError,
    WrongPathwayError,
    equivalence_report,
    singular_report,
    sopde_field,
)
from ksymp._utils import random_lag_points
from ksymp._verify import choose_ansatz, mechanics_operator_residuals

REGULAR_STAGES = [
    "sopde",
    "integrate",
    "euler-lagrange",
    "hdw",
    "hamiltonian-section",
    "unified",
    "field-operator",
    "field-operator-section",
]


@pytest.fixture
def grid():
    """[0, 1]^2 with step 0.05."""
    return Grid.parse("t1=0:1:0.05,t2=0:1:0.05")


@pytest.fixture
def start():
    """Initial point of the plane wave sin(t1 + t2)."""
    return LagPoint([0.0], [[1.0, 1.0]])


@pytest.fixture
def on_image_samples(half_v11_squared):
    """Samples of the almost-regular model with v1_2 = 0."""
    return random_lag_points(half_v11_squared, 6, seed=5, fixed={"v1_2": 0.0})


class TestChooseAnsatz:
    """Tests for the automatic ansatz choice."""

    def test_harmonic_prefers_uniform(self, harmonic, start):
        """Test that the non-integrable symmetric field is passed over."""
        chosen, brackets = choose_ansatz(harmonic, start)
        assert chosen == "uniform"
        assert brackets["symmetric"] > 0.5
        assert brackets["uniform"] < 1e-6

    def test_single_parameter(self, oscillator):
        """Test that k = 1 takes the first candidate."""
        chosen, brackets = choose_ansatz(oscillator, LagPoint([0.0], [[1.0]]))
        assert chosen == "symmetric"
        assert brackets == {"symmetric": 0.0}


class TestRegularPathway:
    """Tests for the regular equivalence report."""

    def test_harmonic_passes(self, harmonic, start, grid):
        """Test that every stage passes for the harmonic plane wave."""
        report = equivalence_report(harmonic, start, grid, reference=["sin(t1 + t2)"])
        assert report.pathway == "regular"
        assert report.ansatz == "uniform"
        assert report.passed, report.to_document()
        assert report.exit_code == 0
        names = [s.name for s in report.stages]
        assert names == REGULAR_STAGES[:3] + ["reference"] + REGULAR_STAGES[3:]
        assert report.stage("hdw").detail == {"hamiltonian": "explicit"}
        assert report.diagnostics["integrable"]
        assert report.diagnostics["path_independence"] < 1e-5
        assert report.stage("sopde").paper_ref == "eq. (lageq0)"
        assert report.stage("hdw").paper_ref == "eq. (HE)"
        assert report.stage("unified").paper_ref == "eq. (s3)/(s8)"
        assert all(s.paper_ref for s in report.stages)

    def test_implicit_hamiltonian(self, free_field, start, grid):
        """Test the HDW stage without an explicit Hamiltonian."""
        report = equivalence_report(free_field, start, grid, reference=["t1 + t2"])
        assert report.passed, report.to_document()
        assert report.stage("hdw").detail == {"hamiltonian": "implicit"}

    def test_non_integrable_ansatz_fails(self, harmonic, start, grid):
        """Test that forcing the symmetric ansatz fails at the integral section."""
        report = equivalence_report(harmonic, start, grid, ansatz="symmetric")
        assert report.ansatz == "symmetric"
        assert not report.passed
        assert report.exit_code == 1
        assert report.first_failure == "integrate"
        assert report.stage("sopde").passed
        assert not report.diagnostics["integrable"]
        assert len(report.stages) == len(REGULAR_STAGES)

    def test_mechanics(self, oscillator):
        """Test the k = 1 pathway with the mechanics operator stage."""
        grid = Grid.parse("t1=0:2:0.01")
        report = equivalence_report(
            oscillator, LagPoint([0.0], [[1.0]]), grid, reference=["sin(t1)"]
        )
        assert report.passed, report.to_document()
        assert report.stages[-1].name == "mechanics-operator"
        assert report.diagnostics["path_independence"] == 0.0

    def test_mechanics_needs_k1(self, harmonic):
        """Test that the mechanics identities are restricted to k = 1."""
        with pytest.raises(ValidationError):
            mechanics_operator_residuals(harmonic, sopde_field(harmonic), [])

    def test_exception_halts(self, harmonic, start):
        """Test that a raising stage is recorded and stops the pipeline."""
        grid = Grid.parse("t1=0.5:1:0.1,t2=0.5:1:0.1")
        report = equivalence_report(harmonic, start, grid)
        assert [s.name for s in report.stages] == ["sopde", "integrate"]
        failed = report.stage("integrate")
        assert math.isinf(failed.max_residual)
        assert failed.detail["error"] == "ValidationError"
        assert report.diagnostics["path_independence"] is None
        assert report.exit_code == 1

    def test_tolerances_from_options(self, harmonic, start, grid):
        """Test that options carry the stage tolerances."""
        options = ToolkitOptions(integration_tol=1e-3, samples=4)
        report = equivalence_report(harmonic, start, grid, options=options)
        assert report.stage("integrate").tolerance == 1e-3
        assert report.stage("sopde").detail["samples"] == 5

    def test_singular_start_switches_pathway(self, half_v11_squared, on_image_samples, grid):
        """Test that a singular initial point hands over to the constraint pathway."""
        report = equivalence_report(
            half_v11_squared, LagPoint([0.1], [[1.0, 0.0]]), grid, samples=on_image_samples
        )
        assert report.pathway == "singular"


class TestSingularPathway:
    """Tests for the singular report."""

    def test_almost_regular_passes(self, half_v11_squared, on_image_samples):
        """Test every stage for v1_1^2/2 on the image of FL."""
        report = singular_report(half_v11_squared, on_image_samples)
        assert report.pathway == "singular"
        assert [s.name for s in report.stages] == [
            "constraint-algorithm",
            "restricted-hamiltonian",
            "structural",
            "field-operator",
            "second-order",
        ]
        assert report.passed, report.to_document()
        assert report.stage("structural").detail["conditions"]["structural"]
        assert [report.stage(name).paper_ref for name in ("structural", "field-operator", "second-order")] == [
            "Definition 6.1 (evo1)",
            "Definition 6.1 (evo2)",
            "Definition 6.1 (evo3)",
        ]
        assert report.diagnostics["primary_constraint_residual"] == 0.0
        assert report.stage("constraint-algorithm").detail["stabilized"]

    def test_second_order_fails_off_gauge(self, half_v11_squared):
        """Test that samples with v1_2 != 0 break the second-order condition."""
        samples = random_lag_points(half_v11_squared, 6, seed=5)
        report = singular_report(half_v11_squared, samples)
        assert not report.stage("second-order").passed
        assert report.first_failure == "second-order"

    def test_without_hamiltonian(self, product):
        """Test that the restricted stage is skipped when H0 is not given."""
        samples = random_lag_points(product, 4)
        report = singular_report(product, samples)
        assert "restricted-hamiltonian" not in [s.name for s in report.stages]

    def test_regular_model_rejected(self, harmonic):
        """Test that the singular pathway refuses regular models."""
        with pytest.raises(WrongPathwayError):
            singular_report(harmonic, random_lag_points(harmonic, 3))

    def test_needs_samples(self, half_v11_squared):
        """Test that at least one sample is required."""
        with pytest.raises(ValidationError):
            singular_report(half_v11_squared, [])


class TestReportDocument:
    """Tests for the report containers."""

    def test_documents(self):
        """Test the JSON layout of stages and reports."""
        stage = Stage(
            "sopde", "eq. (lageq0)", "euler-lagrange-geometric", 1e-12, 1e-9, True, {"samples": 3}
        )
        failing = Stage("integrate", "Definition 3.2 / eq. (nn1)", "integral-section", 1.0, 1e-5, False)
        report = EquivalenceReport("abc", "m", "regular", "uniform", (stage, failing))
        document = report.to_document()
        assert list(document["stages"][0])[:5] == ["name", "paper_ref", "max_residual", "tolerance", "pass"]
        assert document["stages"][0]["paper_ref"] == "eq. (lageq0)"
        assert document["stages"][0]["pass"] is True
        assert document["first_failure"] == "integrate"
        assert report.exit_code == 1
        with pytest.raises(KeyError):
            report.stage("hdw")
