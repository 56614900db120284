"""End-to-end equivalence reports.

A regular model is run through one pipeline: SOPDE solution, integral
section, Euler-Lagrange check, Legendre pushforward and the Hamilton-De
Donder-Weyl check, the unified lift, and the field operator. Each step is a
stage with its own residual and tolerance. Singular models go through the
constraint algorithm and an induced field operator instead.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._errors import KSympError, ValidationError, WrongPathwayError
from ._expr import Expr, ExprLike, as_expr
from ._geometry import is_regular, regularity_at
from ._hamside import (
    constraint_values,
    hamiltonian_kvector_field,
    hdw_residual,
    invert_legendre,
    pushforward_XH,
    restricted_ham_residual,
)
from ._integrate import (
    Grid,
    Section,
    integral_section_residual,
    integrate_section,
    max_over,
    path_independence,
    project_configuration,
    pushforward_section,
    reference_section,
)
from ._koperator import default_k, k_from_hamiltonian, k_from_sopde, k_integral_residual, verify_k
from ._kvector import KVectorField, max_bracket, sopde_residual
from ._lagside import Ansatz, el_residual, lag_geoeq_residual, sopde_field, sopde_solve
from ._options import ToolkitOptions
from ._types import FieldModel, HamPoint, LagPoint, coordinates
from ._unified import (
    constraint_algorithm,
    graph_point,
    lift_from_lagrangian,
    tangency_residual,
    unified_residual,
)
from ._utils import random_lag_points

logger = logging.getLogger(__name__)

AUTO_CANDIDATES: tuple[str, ...] = ("symmetric", "uniform")

# Reference tag of the equation or condition each stage certifies
STAGE_REFERENCES: dict[str, str] = {
    "sopde": "eq. (lageq0)",
    "integrate": "Definition 3.2 / eq. (nn1)",
    "euler-lagrange": "eq. (lageq1)",
    "reference": "eq. (lageq1)",
    "hdw": "eq. (HE)",
    "hamiltonian-section": "Theorem 4.2(b)",
    "unified": "eq. (s3)/(s8)",
    "field-operator": "Definition 6.1 (evo2)",
    "field-operator-section": "Definition 6.3",
    "mechanics-operator": "eqs. (K1)-(K4)",
    "constraint-algorithm": "§5.1 final constraint submanifold",
    "restricted-hamiltonian": "eq. (HEo)",
    "structural": "Definition 6.1 (evo1)",
    "second-order": "Definition 6.1 (evo3)",
}


@dataclass(frozen=True)
class Stage:
    """One checked claim: a residual against a tolerance."""

    name: str
    paper_ref: str
    """Reference tag of the equation or condition, e.g. "eq. (HE)"."""

    certifies: str
    """Readable label of the same claim, e.g. "euler-lagrange"."""

    max_residual: float
    tolerance: float
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "paper_ref": self.paper_ref,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "certifies": self.certifies,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    """Outcome of :func:`equivalence_report` or :func:`singular_report`."""

    model_hash: str
    model: str
    pathway: str
    """"regular" or "singular"."""

    ansatz: str
    stages: tuple[Stage, ...]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def first_failure(self) -> str | None:
        return next((s.name for s in self.stages if not s.passed), None)

    @property
    def passed(self) -> bool:
        return self.first_failure is None

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def stage(self, name: str) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_document(self) -> dict[str, Any]:
        return {
            "model_hash": self.model_hash,
            "model": self.model,
            "pathway": self.pathway,
            "ansatz": self.ansatz,
            "stages": [s.to_document() for s in self.stages],
            "first_failure": self.first_failure,
            "diagnostics": self.diagnostics,
        }


StageResult = tuple[float, dict[str, Any]]


class _StageRunner:
    """Runs stages in order; an exception halts the pipeline, a residual failure does not."""

    def __init__(self) -> None:
        self.stages: list[Stage] = []
        self.halted = False

    def run(
        self, name: str, certifies: str, tolerance: float, fn: Callable[[], StageResult]
    ) -> bool:
        if self.halted:
            return False
        paper_ref = STAGE_REFERENCES[name]
        logger.debug("stage %s started", name)
        try:
            residual, detail = fn()
        except (KSympError, np.linalg.LinAlgError) as exc:
            logger.warning("stage %s aborted: %s", name, exc)
            self.stages.append(
                Stage(
                    name,
                    paper_ref,
                    certifies,
                    math.inf,
                    tolerance,
                    False,
                    {"error": type(exc).__name__, "message": str(exc)},
                )
            )
            self.halted = True
            return False
        passed = bool(residual <= tolerance)
        self.stages.append(
            Stage(name, paper_ref, certifies, float(residual), tolerance, passed, detail)
        )
        if not passed:
            logger.warning("stage %s failed: %.3e > %.3e", name, residual, tolerance)
        logger.debug("stage %s finished: %.3e", name, residual)
        return True


def _max_abs(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if not np.all(np.isfinite(values)):
        return math.inf
    return float(np.max(np.abs(values)))


# ---------------------------------------------------------------------------
# Ansatz selection
# ---------------------------------------------------------------------------


def choose_ansatz(
    m: FieldModel, x0: LagPoint, options: ToolkitOptions | None = None
) -> tuple[str, dict[str, float]]:
    """First of symmetric, uniform whose bracket at ``x0`` is within the integration tolerance.

    Falls back to the candidate with the smallest bracket. Returns the choice
    and the bracket of every candidate tried.
    """
    options = options or ToolkitOptions()
    brackets: dict[str, float] = {}
    for name in AUTO_CANDIDATES:
        X = sopde_field(m, name, options.pivot_tol)  # type: ignore[arg-type]
        brackets[name] = max_bracket(X, x0, options.bracket_step)
        if brackets[name] <= options.integration_tol:
            return name, brackets
    return min(brackets, key=brackets.__getitem__), brackets


# ---------------------------------------------------------------------------
# Hamiltonian-side helpers
# ---------------------------------------------------------------------------


def _implicit_hdw_residual(m: FieldModel, psi: Section, psi_h: Section) -> np.ndarray:
    """HDW residual using the known preimage ψ_L instead of an explicit H."""
    k, n = m.k, m.n
    xs = psi.flat_nodes()
    count = xs.shape[1]
    first = psi_h.require_first().reshape(count, k, m.ham_dim)
    divergence = sum(first[:, a, n + a * n : n + (a + 1) * n] for a in range(k))
    dq = m.eval_dq(xs).T
    velocities = xs[n:].reshape(n, k, count).transpose(2, 1, 0).reshape(count, k * n)
    base = first[:, :, :n].reshape(count, k * n)
    out = np.concatenate([-dq + divergence, velocities - base], axis=1)
    return out.reshape(psi.grid.shape + (n + n * k,))


def _pushed_field_residual(m: FieldModel, XL: KVectorField, psi: Section, psi_h: Section) -> np.ndarray:
    """∂(FL∘ψ)/∂t^A − J_FL(ψ)·X_A(ψ) at every node."""
    xs = psi.flat_nodes()
    count = xs.shape[1]
    out = np.full((count, m.k, m.ham_dim), np.nan)
    finite = np.all(np.isfinite(xs), axis=0)
    if finite.any():
        cols = xs[:, finite]
        pushed = np.einsum("rlb,alb->bar", m.eval_jacobian(cols), XL.evaluate_many(cols))
        first = psi_h.require_first().reshape(count, m.k, m.ham_dim)
        out[finite] = first[finite] - pushed
    return out.reshape(psi.grid.shape + (m.k, m.ham_dim))


def mechanics_operator_residuals(
    m: FieldModel, XL: KVectorField, samples: Sequence[LagPoint]
) -> dict[str, float]:
    """For k = 1: max |T(FL)∘X_L − 𝒦| and max |X_H∘FL − 𝒦| with 𝒦 the default operator.

    X_H is the explicit Hamiltonian field when the model defines H, otherwise
    the pushforward of X_L.

    Raises:
        ValidationError: The model has k != 1.
    """
    if m.k != 1:
        raise ValidationError("the mechanics operator identities apply to k = 1")
    K = default_k(m)
    K_pushed = k_from_sopde(m, XL)
    XH = hamiltonian_kvector_field(m.hamiltonian, 1, m.n) if m.hamiltonian is not None else None
    k2a = 0.0
    k4 = 0.0
    for x in samples:
        target = K.evaluate(x)
        k2a = max(k2a, _max_abs(K_pushed.evaluate(x) - target))
        y = HamPoint(x.q, m.eval_momenta(x.to_array()).reshape(1, m.n))
        ham = XH.evaluate(y) if XH is not None else pushforward_XH(m, XL, y, guess=x)
        k4 = max(k4, _max_abs(ham - target))
    return {"tangent_legendre": k2a, "hamiltonian_field": k4}


# ---------------------------------------------------------------------------
# Regular pathway
# ---------------------------------------------------------------------------


def _node_subset(psi: Section, count: int) -> list[np.ndarray]:
    nodes = psi.flat_nodes()
    finite = np.flatnonzero(np.all(np.isfinite(nodes), axis=0))
    if finite.size == 0:
        return []
    picks = np.unique(np.linspace(0, finite.size - 1, min(count, finite.size)).astype(int))
    return [nodes[:, j] for j in finite[picks]]


def equivalence_report(
    m: FieldModel,
    x0: LagPoint,
    grid: Grid,
    *,
    ansatz: Ansatz | str = "auto",
    reference: Sequence[ExprLike] | None = None,
    samples: Sequence[LagPoint] | None = None,
    options: ToolkitOptions | None = None,
) -> EquivalenceReport:
    """Run the Lagrangian, Hamiltonian, unified and field-operator checks from ``x0``.

    A model that is singular at ``x0`` is handed to :func:`singular_report`.

    Args:
        m: Field model.
        x0: Initial point of the integral section.
        grid: Parameter grid containing the origin.
        ansatz: Ansatz for the SOPDE solution, or "auto".
        reference: Optional analytic configuration section in t1..tk.
        samples: Points for the pointwise stages; seeded random points by default.
        options: Tolerances and numerical settings.
    """
    options = options or ToolkitOptions()
    m.check_point(x0)
    points = list(samples) if samples is not None else random_lag_points(
        m, options.samples, options.seed
    )
    if not regularity_at(m, [x0], options.regularity_tol):
        logger.info("model %s is singular at x0; switching to the constraint pathway", m.name)
        return singular_report(m, points, options=options)

    workers = options.resolved_workers()
    if ansatz == "auto":
        chosen, brackets = choose_ansatz(m, x0, options)
    else:
        chosen = str(ansatz)
        brackets = {}
    XL = sopde_field(m, chosen, options.pivot_tol)  # type: ignore[arg-type]
    bracket = brackets.get(chosen)
    if bracket is None:
        bracket = max_bracket(XL, x0, options.bracket_step)
    checked = [x0, *points]
    runner = _StageRunner()
    state: dict[str, Any] = {}

    def sopde_stage() -> StageResult:
        geometric = max(_max_abs(lag_geoeq_residual(m, XL, x)) for x in checked)
        second = sopde_residual(XL, checked)
        consistent = all(sopde_solve(m, x, chosen, options.residual_tol).consistent for x in checked)  # type: ignore[arg-type]
        detail = {
            "ansatz": chosen,
            "geometric_residual": geometric,
            "second_order_residual": second,
            "consistent": consistent,
            "samples": len(checked),
        }
        return max(geometric, second), detail

    def integrate_stage() -> StageResult:
        psi = integrate_section(
            XL,
            x0,
            grid,
            tol=options.residual_tol,
            substeps=options.substeps,
            blowup_threshold=options.blowup_threshold,
        ).with_finite_differences(options.fd_order)
        state["psi"] = psi
        residual = max_over(integral_section_residual(XL, psi), psi.interior_mask(1))
        detail = {
            "nodes": grid.size,
            "fd_order": options.fd_order,
            "truncated": psi.truncated,
            "diagnostics": list(psi.diagnostics),
        }
        return residual, detail

    def euler_lagrange_stage() -> StageResult:
        phi = project_configuration(state["psi"])
        state["phi"] = phi
        return max_over(el_residual(m, phi), phi.interior_mask(1)), {"derivatives": "velocities"}

    def reference_stage() -> StageResult:
        exact = reference_section(m.k, m.n, grid, [as_expr(e) for e in reference or ()])
        gap = state["phi"].values - exact.values
        mask = np.ones(grid.shape, dtype=bool)
        return max_over(gap, mask), {"reference": [str(as_expr(e)) for e in reference or ()]}

    def hdw_stage() -> StageResult:
        psi = state["psi"]
        psi_h = pushforward_section(m, psi, options.fd_order)
        state["psi_h"] = psi_h
        if m.hamiltonian is not None:
            residual = hdw_residual(m.hamiltonian, psi_h)
            source = "explicit"
        else:
            residual = _implicit_hdw_residual(m, psi, psi_h)
            source = "implicit"
        return max_over(residual, psi_h.interior_mask(1)), {"hamiltonian": source}

    def pushed_section_stage() -> StageResult:
        psi, psi_h = state["psi"], state["psi_h"]
        residual = _pushed_field_residual(m, XL, psi, psi_h)
        return max_over(residual, psi_h.interior_mask(1)), {}

    def unified_stage() -> StageResult:
        psi = state["psi"]
        Z = lift_from_lagrangian(m, XL, checked, options.residual_tol)
        nodes = _node_subset(psi, options.report_nodes)
        state["nodes"] = nodes
        tangency = 0.0
        equation = 0.0
        for x in nodes:
            w = graph_point(m, LagPoint.from_array(x, m.k, m.n))
            tangency = max(tangency, _max_abs(tangency_residual(m, Z, w)))
            equation = max(equation, _max_abs(unified_residual(m, Z, w)))
        detail = {"nodes": len(nodes), "tangency": tangency, "unified_equation": equation}
        return max(tangency, equation), detail

    def operator_stage() -> StageResult:
        K = k_from_sopde(m, XL)
        state["K"] = K
        result = verify_k(
            m, K, [*state["nodes"], *checked], options.residual_tol, workers=workers
        )
        detail = {
            "conditions": result.conditions(),
            "field_equation": result.field_eq_residual,
            "second_order": result.second_order_residual,
            "kl": result.kl_residual,
            "samples": result.samples_used,
        }
        return max(result.field_eq_residual, result.second_order_residual, result.kl_residual), detail

    def operator_section_stage() -> StageResult:
        psi = state["psi"]
        residual = k_integral_residual(m, state["K"], psi)
        return max_over(residual, psi.interior_mask(1)), {}

    def mechanics_stage() -> StageResult:
        residuals = mechanics_operator_residuals(m, XL, checked)
        return max(residuals.values()), residuals

    tol, itol = options.residual_tol, options.integration_tol
    runner.run("sopde", "euler-lagrange-geometric", tol, sopde_stage)
    runner.run("integrate", "integral-section", itol, integrate_stage)
    runner.run("euler-lagrange", "euler-lagrange", itol, euler_lagrange_stage)
    if reference:
        runner.run("reference", "analytic-solution", itol, reference_stage)
    runner.run("hdw", "hdw-equations", itol, hdw_stage)
    runner.run("hamiltonian-section", "hamiltonian-integral-section", itol, pushed_section_stage)
    runner.run("unified", "unified-tangency", tol, unified_stage)
    runner.run("field-operator", "field-operator", tol, operator_stage)
    runner.run("field-operator-section", "field-operator-integral-section", itol, operator_section_stage)
    if m.k == 1:
        runner.run("mechanics-operator", "mechanics-operator", tol, mechanics_stage)

    diagnostics: dict[str, Any] = {
        "regular": True,
        "bracket": bracket,
        "brackets": brackets,
        "integrable": bracket <= options.bracket_tol,
        "path_independence": None,
    }
    if not runner.halted:
        diagnostics["path_independence"] = path_independence(
            XL, x0, grid, substeps=options.substeps, blowup_threshold=options.blowup_threshold
        )
    return EquivalenceReport(
        m.model_hash, m.name, "regular", chosen, tuple(runner.stages), diagnostics
    )


# ---------------------------------------------------------------------------
# Singular pathway
# ---------------------------------------------------------------------------


def candidate_hamiltonian_field(
    m: FieldModel, ansatz: Ansatz = "symmetric", options: ToolkitOptions | None = None
) -> KVectorField:
    """X₀ on the image of FL from the least-squares SOPDE solution at a chosen preimage.

    At y the preimage x̃ is found by minimum-norm Newton steps from v = 0, and
    (X₀)_A(y) = J_FL(x̃)·(X_L)_A(x̃).
    """
    options = options or ToolkitOptions()

    def evaluate(ys: np.ndarray) -> np.ndarray:
        single = ys.ndim == 1
        cols = ys[:, None] if single else ys
        out = np.empty((m.k, m.ham_dim, cols.shape[1]))
        for j in range(cols.shape[1]):
            y = HamPoint.from_array(cols[:, j], m.k, m.n)
            guess = LagPoint(y.q, np.zeros((m.n, m.k)))
            x = invert_legendre(
                m,
                y,
                guess,
                options.newton_tol,
                options.newton_max_iter,
                allow_singular=True,
                pivot_tol=options.pivot_tol,
            )
            solution = sopde_solve(m, x, ansatz, options.residual_tol, options.pivot_tol)
            out[..., j] = solution.field_values(x) @ m.eval_jacobian(x.to_array()).T
        return out[..., 0] if single else out

    return KVectorField.from_function("hamiltonian", m.k, m.n, evaluate, label="X0")


def _hamiltonian_constraints(m: FieldModel) -> list[Expr]:
    allowed = set(coordinates("hamiltonian", m.k, m.n))
    return [c for c in m.constraints if c.free_variables <= allowed]


def singular_report(
    m: FieldModel,
    samples: Sequence[LagPoint],
    *,
    ansatz: Ansatz = "symmetric",
    options: ToolkitOptions | None = None,
) -> EquivalenceReport:
    """Constraint algorithm plus an induced field operator for a singular model.

    Reports which of the defining conditions of a field operator the induced
    operator satisfies on ``samples``.

    Raises:
        WrongPathwayError: The model is regular at every sample.
        ValidationError: No samples were given.
    """
    options = options or ToolkitOptions()
    if not samples:
        raise ValidationError("the singular pathway needs at least one sample")
    if is_regular(m, samples, options.regularity_tol).regular:
        raise WrongPathwayError(f"model {m.name!r} is regular; use the equivalence report")
    workers = options.resolved_workers()
    runner = _StageRunner()
    X0 = candidate_hamiltonian_field(m, ansatz, options)
    ham_constraints = _hamiltonian_constraints(m)

    def constraint_stage() -> StageResult:
        report = constraint_algorithm(
            m,
            [graph_point(m, x) for x in samples],
            options.max_levels,
            options.residual_tol,
            pivot_tol=options.pivot_tol,
            submanifold_tol=options.submanifold_tol,
            workers=workers,
        )
        last = report.levels[-1]
        residual = max(last.residuals, default=0.0) if report.stabilized else math.inf
        return residual, report.to_document()

    def restricted_stage() -> StageResult:
        worst = 0.0
        deficient = False
        for x in samples:
            y = HamPoint(x.q, m.eval_momenta(x.to_array()).reshape(m.k, m.n))
            result = restricted_ham_residual(
                m,
                ham_constraints,
                X0,
                y,
                tol=options.submanifold_tol,
                pivot_tol=options.pivot_tol,
            )
            worst = max(worst, result.max_residual)
            deficient = deficient or result.rank_deficient
        detail = {
            "constraints": [str(c) for c in ham_constraints],
            "rank_deficient": deficient,
        }
        return worst, detail

    def structural_stage() -> StageResult:
        K = k_from_hamiltonian(m, X0)
        result = verify_k(m, K, samples, options.residual_tol, workers=workers)
        state["verification"] = result
        detail = {"conditions": result.conditions(), "samples": result.samples_used}
        return (0.0 if result.structural else math.inf), detail

    def operator_stage() -> StageResult:
        result = state["verification"]
        return result.field_eq_residual, {"kl": result.kl_residual, "samples": result.samples_used}

    def second_order_stage() -> StageResult:
        result = state["verification"]
        return result.second_order_residual, {"samples": result.samples_used}

    state: dict[str, Any] = {}
    tol = options.residual_tol
    runner.run("constraint-algorithm", "constraint-algorithm", tol, constraint_stage)
    if m.hamiltonian is not None:
        runner.run("restricted-hamiltonian", "hamiltonian-restricted", tol, restricted_stage)
    else:
        logger.info("model %s defines no H0; skipping the restricted Hamiltonian stage", m.name)
    runner.run("structural", "field-operator-structural", tol, structural_stage)
    runner.run("field-operator", "field-operator", tol, operator_stage)
    runner.run("second-order", "second-order", tol, second_order_stage)
    off_image = [
        _max_abs(constraint_values(ham_constraints, graph_point(m, x).hamiltonian)) for x in samples
    ] if ham_constraints else []
    diagnostics = {
        "regular": False,
        "samples": len(samples),
        "primary_constraint_residual": max(off_image, default=0.0),
    }
    return EquivalenceReport(
        m.model_hash, m.name, "singular", str(ansatz), tuple(runner.stages), diagnostics
    )
