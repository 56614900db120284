"""Unified formalism on the Whitney sum W = T¹ₖQ ⊕ (T¹ₖ)*Q.

Points of W carry (q, v, p). The dynamics is the equation Σ_A ι_{Z_A} Ω_A = d𝓗
with 𝓗 = Σ pᴬ_i vⁱ_A − L; its compatibility conditions are the graph of the
Legendre map, and tangency to that graph recovers the Euler-Lagrange system.
Everything here is pointwise linear algebra on top of the symbolic model.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

from ._constants import (
    DEFAULT_MAX_LEVELS,
    DEFAULT_PIVOT_TOL,
    DEFAULT_PROJECTION_MAX_ITER,
    DEFAULT_RESIDUAL_TOL,
    DEFAULT_SAMPLE_SCALE,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_SUBMANIFOLD_TOL,
)
from ._errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    NotSopdeError,
    NotTangentError,
    ValidationError,
)
from ._expr import (
    ZERO,
    Binary,
    Const,
    Expr,
    Unary,
    Var,
    compile_many,
    format_number,
    gradient,
    is_zero,
    simplify,
    substitute,
    to_string,
)
from ._geometry import PullbackCheck, lagrangian_two_forms, legendre_jacobian, unified_family
from ._kvector import KVectorField, contraction_matrix, sopde_residual
from ._lagside import symmetric_ansatz
from ._linalg import (
    clean_coefficient,
    left_null_space,
    min_norm_solve,
    null_space,
    numeric_rank,
    rref,
)
from ._types import FieldModel, LagPoint, UnifiedPoint, p_name, v_name
from ._utils import random_lag_points
from ._workers import map_samples

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Functions on the Whitney sum
# ---------------------------------------------------------------------------


def _unified_array(m: FieldModel, w: UnifiedPoint | np.ndarray) -> np.ndarray:
    if isinstance(w, UnifiedPoint):
        m.check_point(w)
        return w.to_array()
    arr = np.asarray(w, dtype=float)
    if arr.shape != (m.unified_dim,):
        raise DimensionMismatchError(
            f"expected {m.unified_dim} unified coordinates, got shape {arr.shape}"
        )
    return arr


def coupling(m: FieldModel, w: UnifiedPoint) -> float:
    """Σ_A Σ_i pᴬ_i vⁱ_A."""
    m.check_point(w)
    return float(np.sum(w.p.T * w.v))


def unified_hamiltonian(m: FieldModel, w: UnifiedPoint) -> float:
    """𝓗(w) = coupling(w) − L(q, v)."""
    return coupling(m, w) - float(m.eval_lagrangian(w.lagrangian.to_array()))


@lru_cache(maxsize=64)
def unified_hamiltonian_expr(m: FieldModel) -> Expr:
    total: Expr = ZERO
    for a in range(m.k):
        for i in range(m.n):
            total = total + Var(p_name(a, i)) * Var(v_name(i, a))
    return simplify(total - m.lagrangian)


@lru_cache(maxsize=64)
def _differential_exprs(m: FieldModel) -> tuple[Expr, ...]:
    return gradient(unified_hamiltonian_expr(m), m.unified_coords)


@lru_cache(maxsize=64)
def _differential_fn(m: FieldModel):
    return compile_many(_differential_exprs(m), m.unified_coords)


def unified_differential(m: FieldModel, w: UnifiedPoint | np.ndarray) -> np.ndarray:
    """d𝓗 at ``w``: (−∂L/∂q, p − ∂L/∂v, v) in unified coordinate order."""
    return _differential_fn(m)(_unified_array(m, w))


def graph_point(m: FieldModel, x: LagPoint) -> UnifiedPoint:
    """(Id ⊕ FL)(x): the point of the graph of FL over ``x``."""
    m.check_point(x)
    p = m.eval_momenta(x.to_array()).reshape(m.k, m.n)
    return UnifiedPoint(x.q, x.v, p)


def _graph_array(m: FieldModel, xs: np.ndarray) -> np.ndarray:
    return np.concatenate([xs, m.eval_momenta(xs)], axis=0)


def graph_samples(
    m: FieldModel,
    count: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SAMPLE_SCALE,
    fixed: Mapping[str, float] | None = None,
) -> list[UnifiedPoint]:
    """Seeded random points of the graph of FL."""
    return [graph_point(m, x) for x in random_lag_points(m, count, seed, scale, fixed)]


@lru_cache(maxsize=64)
def graph_constraints(m: FieldModel) -> tuple[Expr, ...]:
    """pᴬ_i − ∂L/∂vⁱ_A in momentum order (A, i)."""
    return tuple(
        simplify(Var(p_name(a, i)) - m.momenta[a * m.n + i])
        for a in range(m.k)
        for i in range(m.n)
    )


def graph_residual(m: FieldModel, w: UnifiedPoint) -> np.ndarray:
    """pᴬ_i − ∂L/∂vⁱ_A at ``w``, the obstruction to solving the unified equation."""
    m.check_point(w)
    return w.p.ravel() - m.eval_momenta(w.lagrangian.to_array())


# ---------------------------------------------------------------------------
# The unified equation
# ---------------------------------------------------------------------------


def _field_values(m: FieldModel, Z: KVectorField | np.ndarray, w: np.ndarray) -> np.ndarray:
    if isinstance(Z, KVectorField):
        if Z.space != "unified" or Z.k != m.k or Z.n != m.n:
            raise DimensionMismatchError(
                f"expected a unified field with (k={m.k}, n={m.n}), got {Z.space} (k={Z.k}, n={Z.n})"
            )
        return Z.evaluate(w)
    values = np.asarray(Z, dtype=float)
    if values.shape != (m.k, m.unified_dim):
        raise DimensionMismatchError(
            f"expected coefficients of shape {(m.k, m.unified_dim)}, got {values.shape}"
        )
    return values


def unified_residual(
    m: FieldModel, Z: KVectorField | np.ndarray, w: UnifiedPoint | np.ndarray
) -> np.ndarray:
    """Σ_A ι_{Z_A}Ω_A − d𝓗 at ``w``."""
    arr = _unified_array(m, w)
    values = _field_values(m, Z, arr)
    omega = unified_family(m.k, m.n).evaluate(arr)
    return np.einsum("ai,aij->j", values, omega) - unified_differential(m, arr)


def tangency_residual(
    m: FieldModel, Z: KVectorField | np.ndarray, w: UnifiedPoint | np.ndarray
) -> np.ndarray:
    """Failure of Z to be tangent to the graph of FL, indexed [A, B, j].

    Entry (A, B, j) is (Z_A)ᴮ_j − vⁱ_A ∂²L/∂qⁱ∂vʲ_B − (Z_A)ⁱ_C ∂²L/∂vⁱ_C∂vʲ_B.
    """
    k, n = m.k, m.n
    nk = n * k
    arr = _unified_array(m, w)
    values = _field_values(m, Z, arr)
    x = arr[: m.lag_dim]
    v = x[n:].reshape(n, k)
    hess = m.eval_hessian(x)
    mixed = m.eval_mixed(x)
    expected = v.T @ mixed + values[:, n : n + nk] @ hess
    expected = expected.reshape(k, n, k).transpose(0, 2, 1)
    return values[:, n + nk :].reshape(k, k, n) - expected


def _tangency_system(m: FieldModel, x: np.ndarray, p_block: np.ndarray):
    """Matrix and right side for the velocity components given the p-components.

    Unknowns are (Z_A)ⁱ_C at index A·nk + i·k + C; ``p_block`` is [A, B, j].
    """
    k, n = m.k, m.n
    v = x[n:].reshape(n, k)
    hess = m.eval_hessian(x)
    mixed = m.eval_mixed(x)
    matrix = np.kron(np.eye(k), hess)
    rhs = p_block.transpose(0, 2, 1).reshape(k, n * k) - v.T @ mixed
    return matrix, rhs.ravel()


@dataclass(frozen=True, eq=False)
class SRSolution:
    """Outcome of solving the unified equation at one point."""

    graph_residual: np.ndarray
    """pᴬ_i − ∂L/∂vⁱ_A at the point, momentum order."""

    feasible: bool
    components: np.ndarray | None
    """Coefficients (k, dim W) of one solution, or None when infeasible."""

    tangency: float
    """Sup-norm of :func:`tangency_residual` for ``components``; NaN when infeasible."""

    ansatz: str
    """"symmetric" or "unrestricted": the class the velocity components were drawn from."""


def sr_solve(
    m: FieldModel,
    w: UnifiedPoint,
    tol: float = DEFAULT_RESIDUAL_TOL,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
) -> SRSolution:
    """Solve Σ_A ι_{Z_A}Ω_A = d𝓗 at ``w`` in the gauge (Z_A)ᴮ_i = δᴬᴮ ∂L/∂qⁱ / k.

    Base components are (Z_A)ⁱ = vⁱ_A. Velocity components solve the tangency
    system by minimum norm among symmetric (Z_A)ⁱ_B = (Z_B)ⁱ_A; if no symmetric
    choice is tangent the unrestricted minimum-norm solution is used.

    Off the graph of FL the equation has no solution and the result is
    infeasible; that is reported, not raised.
    """
    k, n = m.k, m.n
    residual = graph_residual(m, w)
    if residual.size and float(np.max(np.abs(residual))) > tol:
        return SRSolution(residual, False, None, float("nan"), "")
    x = w.lagrangian.to_array()
    dq = m.eval_dq(x)
    p_block = np.zeros((k, k, n))
    for a in range(k):
        p_block[a, a] = dq / k
    matrix, rhs = _tangency_system(m, x, p_block)
    basis = symmetric_ansatz(m)
    result = min_norm_solve(matrix @ basis, rhs, pivot_tol)
    velocities, ansatz = basis @ result.solution, "symmetric"
    if result.residual > tol:
        logger.debug("no symmetric tangent solution (residual %.3e); dropping symmetry", result.residual)
        result = min_norm_solve(matrix, rhs, pivot_tol)
        velocities, ansatz = result.solution, "unrestricted"
    values = np.zeros((k, m.unified_dim))
    values[:, :n] = w.v.T
    values[:, n : n + n * k] = velocities.reshape(k, n * k)
    values[:, n + n * k :] = p_block.reshape(k, k * n)
    tangency = float(np.max(np.abs(tangency_residual(m, values, w))))
    return SRSolution(residual, True, values, tangency, ansatz)


def omega_kernel_basis(
    m: FieldModel, w: UnifiedPoint | np.ndarray, pivot_tol: float = DEFAULT_PIVOT_TOL
) -> np.ndarray:
    """Orthonormal basis (columns, flattened A·dim + i) of the kernel of Z ↦ Σ_A ι_{Z_A}Ω_A."""
    return null_space(contraction_matrix(unified_family(m.k, m.n), _unified_array(m, w)), pivot_tol)


def graph_pullback_residual(
    m: FieldModel, x: LagPoint, tol: float = DEFAULT_RESIDUAL_TOL
) -> PullbackCheck:
    """Compare the pullback of Ω_A along Id ⊕ FL with (ω_L)_A at ``x``."""
    m.check_point(x)
    embedding = np.vstack([np.eye(m.lag_dim), legendre_jacobian(m, x)[m.n :]])
    big = unified_family(m.k, m.n).evaluate(graph_point(m, x))
    small = lagrangian_two_forms(m).evaluate(x)
    residuals = tuple(
        float(np.max(np.abs(embedding.T @ big[a] @ embedding - small[a]))) for a in range(m.k)
    )
    return PullbackCheck(residuals, tol)


# ---------------------------------------------------------------------------
# Projection and lifting
# ---------------------------------------------------------------------------


def project_to_lagrangian(
    m: FieldModel,
    Z: KVectorField,
    samples: Sequence[LagPoint | UnifiedPoint],
    tol: float = DEFAULT_SUBMANIFOLD_TOL,
) -> KVectorField:
    """Push a field tangent to the graph of FL down to T¹ₖQ.

    The p-components are dropped and any p-dependence of the remaining
    components is resolved through p = ∂L/∂v.

    Raises:
        NotTangentError: Some test point has tangency residual above ``tol``.
    """
    if not samples:
        raise ValidationError("tangency needs at least one test point")
    points = [graph_point(m, s) if isinstance(s, LagPoint) else s for s in samples]
    worst = max(float(np.max(np.abs(tangency_residual(m, Z, w)))) for w in points)
    if worst > tol:
        raise NotTangentError(f"field is not tangent to the graph of FL (residual {worst:.3e})")
    lag_dim = m.lag_dim
    label = f"pr({Z.label})" if Z.label else "projected"
    if Z.is_symbolic:
        rows = [
            [substitute(c, m.graph_substitution) for c in Z.component(a)[:lag_dim]]
            for a in range(m.k)
        ]
        return KVectorField.from_exprs("lagrangian", m.k, m.n, rows, label=label)

    def function(xs: np.ndarray) -> np.ndarray:
        ws = _graph_array(m, xs)
        values = Z.evaluate(ws) if ws.ndim == 1 else Z.evaluate_many(ws)
        return values[:, :lag_dim]

    return KVectorField.from_function("lagrangian", m.k, m.n, function, label=label)


def _lift_exprs(m: FieldModel, XL: KVectorField) -> list[list[Expr]]:
    k, n = m.k, m.n
    nk = n * k
    rows: list[list[Expr]] = []
    for a in range(k):
        comp = XL.component(a)
        base = [Var(v_name(i, a)) for i in range(n)]
        velocities = list(comp[n:])
        momenta: list[Expr] = []
        for c in range(k):
            for j in range(n):
                total: Expr = ZERO
                for i in range(n):
                    mixed = m.d2L_dqdv[i][j * k + c]
                    if not is_zero(mixed):
                        total = total + Var(v_name(i, a)) * mixed
                for e in range(nk):
                    hess = m.d2L_dvdv[e][j * k + c]
                    if not is_zero(hess) and not is_zero(velocities[e]):
                        total = total + velocities[e] * hess
                momenta.append(simplify(total))
        rows.append(base + velocities + momenta)
    return rows


def lift_from_lagrangian(
    m: FieldModel,
    XL: KVectorField,
    samples: Sequence[LagPoint] | None = None,
    tol: float = DEFAULT_RESIDUAL_TOL,
) -> KVectorField:
    """Lift a SOPDE on T¹ₖQ to the graph of FL, (Id ⊕ FL)_* X_A.

    The p-components are (Z_A)ᶜ_j = vⁱ_A ∂²L/∂qⁱ∂vʲ_C + (X_A)ⁱ_B ∂²L/∂vⁱ_B∂vʲ_C,
    which only depend on (q, v).

    Args:
        m: Field model.
        XL: Second-order field on T¹ₖQ.
        samples: Points for the second-order check; seeded random points by default.
        tol: Largest accepted |(X_A)ⁱ − vⁱ_A|.

    Raises:
        NotSopdeError: ``XL`` fails the second-order condition.
    """
    if XL.space != "lagrangian" or XL.k != m.k or XL.n != m.n:
        raise DimensionMismatchError("the lift needs a field on T1kQ of the model's (k, n)")
    points = list(samples) if samples is not None else random_lag_points(m, DEFAULT_SAMPLES)
    gap = sopde_residual(XL, points)
    if gap > tol:
        raise NotSopdeError(f"field {XL.label or '<anonymous>'} is not second order ({gap:.3e})")
    label = f"lift({XL.label})" if XL.label else "lift"
    if XL.is_symbolic:
        return KVectorField.from_exprs("unified", m.k, m.n, _lift_exprs(m, XL), label=label)

    k, n, lag_dim = m.k, m.n, m.lag_dim

    def function(ws: np.ndarray) -> np.ndarray:
        single = ws.ndim == 1
        xs = (ws[:, None] if single else ws)[:lag_dim]
        batch = xs.shape[1]
        velocities = XL.evaluate_many(xs)[:, n:]
        v = xs[n:].reshape(n, k, batch)
        hess = m.eval_hessian(xs)
        mixed = m.eval_mixed(xs)
        momenta = np.einsum("iab,icb->acb", v, mixed) + np.einsum("aeb,ecb->acb", velocities, hess)
        momenta = momenta.reshape(k, n, k, batch).transpose(0, 2, 1, 3).reshape(k, n * k, batch)
        out = np.concatenate([v.transpose(1, 0, 2), velocities, momenta], axis=1)
        return out[..., 0] if single else out

    return KVectorField.from_function("unified", k, n, function, label=label)


# ---------------------------------------------------------------------------
# Constraint algorithm
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _SampleOutcome:
    residual: float
    rank: int
    jacobian_rank: int
    solution: np.ndarray
    kernel: np.ndarray


class _LevelSystem:
    """Unified equation plus tangency to a fixed set of constraints.

    Unknowns are the flattened coefficients A·dim + c of (Z_1, ..., Z_k); rows
    are the contraction with Ω followed by ∇φ·Z_A = 0 for each constraint φ and
    each A.
    """

    def __init__(
        self,
        m: FieldModel,
        constraints: tuple[Expr, ...],
        pivot_tol: float,
        submanifold_tol: float,
    ) -> None:
        coords = m.unified_coords
        self.m = m
        self.constraints = constraints
        self.pivot_tol = pivot_tol
        self.submanifold_tol = submanifold_tol
        grads = [gradient(c, coords) for c in constraints]
        self.symbolic = all(isinstance(g, Const) for row in grads for g in row)
        self._omega = unified_family(m.k, m.n)
        self._values = compile_many(constraints, coords)
        self._jacobian = compile_many([g for row in grads for g in row], coords)

    def values(self, w: np.ndarray) -> np.ndarray:
        return self._values(w)

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        return self._jacobian(w).reshape(len(self.constraints), self.m.unified_dim)

    def matrix(self, w: np.ndarray) -> np.ndarray:
        tangency = np.kron(np.eye(self.m.k), self.jacobian(w))
        return np.vstack([contraction_matrix(self._omega, w), tangency])

    def rhs(self, w: np.ndarray) -> np.ndarray:
        extra = np.zeros(self.m.k * len(self.constraints))
        return np.concatenate([unified_differential(self.m, w), extra])

    def solve(self, w: np.ndarray) -> _SampleOutcome:
        a = self.matrix(w)
        result = min_norm_solve(a, self.rhs(w), self.pivot_tol)
        return _SampleOutcome(
            residual=result.residual,
            rank=result.rank,
            jacobian_rank=numeric_rank(self.jacobian(w), self.submanifold_tol),
            solution=result.solution,
            kernel=null_space(a, self.pivot_tol),
        )

    def conditions(self, w: np.ndarray) -> tuple[Expr, ...]:
        """Consistency conditions yᵀb over the left kernel of the (constant) matrix."""
        left = left_null_space(self.matrix(w), self.pivot_tol)
        if left.shape[1] == 0:
            return ()
        rows, _ = rref(left.T, self.pivot_tol)
        rhs = list(_differential_exprs(self.m)) + [ZERO] * (self.m.k * len(self.constraints))
        found: list[Expr] = []
        for row in rows:
            total: Expr = ZERO
            for coefficient, term in zip(row, rhs):
                if coefficient == 0.0 or is_zero(term):
                    continue
                c = clean_coefficient(coefficient)
                if c == 1.0:
                    total = total + term
                elif c == -1.0:
                    total = total - term
                else:
                    total = total + Const(c) * term
            condition = _leading_positive(simplify(total))
            if not is_zero(condition):
                found.append(condition)
        return tuple(found)


def _leading_positive(e: Expr) -> Expr:
    negative = (
        (isinstance(e, Const) and e.value < 0)
        or (isinstance(e, Unary) and e.op == "neg")
        or (
            isinstance(e, Binary)
            and e.op in ("mul", "div")
            and isinstance(e.left, Const)
            and e.left.value < 0
        )
    )
    return simplify(-e) if negative else e


def _project(
    system: _LevelSystem, w: np.ndarray, tol: float, max_iter: int, pivot_tol: float
) -> np.ndarray | None:
    """Minimum-norm Gauss-Newton projection of ``w`` onto the common zero set."""
    point = w.copy()
    for _ in range(max_iter):
        values = system.values(point)
        if not values.size or float(np.max(np.abs(values))) <= tol:
            return point
        step = min_norm_solve(system.jacobian(point), values, pivot_tol).solution
        point = point - step
        if not np.all(np.isfinite(point)):
            return None
    values = system.values(point)
    return point if float(np.max(np.abs(values))) <= tol else None


@dataclass(frozen=True, eq=False)
class ConstraintLevel:
    """One pass of the constraint algorithm."""

    index: int
    constraints: tuple[Expr, ...]
    """Constraints in force at this level."""

    samples: int
    ranks: tuple[int, ...]
    """Rank of the solvability system per sample."""

    residuals: tuple[float, ...]
    """Least-squares residual of the solvability system per sample."""

    jacobian_ranks: tuple[int, ...]
    new_constraints: tuple[Expr, ...]
    dropped: int
    """Samples lost before the next level (inconsistent or not projectable)."""

    symbolic: bool
    divergent: bool
    """Symbolic conditions and numeric residuals disagreed at some sample."""

    @property
    def new_count(self) -> int:
        return len(self.new_constraints)

    def to_document(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "constraints": [to_string(c) for c in self.constraints],
            "samples": self.samples,
            "ranks": list(self.ranks),
            "residuals": list(self.residuals),
            "jacobian_ranks": list(self.jacobian_ranks),
            "new_constraints": [to_string(c) for c in self.new_constraints],
            "dropped": self.dropped,
            "symbolic": self.symbolic,
            "divergent": self.divergent,
        }


@dataclass(frozen=True, eq=False)
class ConstraintReport:
    """Result of :func:`constraint_algorithm`."""

    model: str
    levels: tuple[ConstraintLevel, ...]
    stabilized: bool
    """True when a level added no constraint and dropped no sample.

    A run that loses every sample stops unstabilized, even if its last level
    added no constraint.
    """

    final_level: int
    final_constraints: tuple[Expr, ...]
    dimension: int | None
    """dim W minus the constraint Jacobian rank at the final level; None without samples."""

    exceeds_k: bool
    derived_relations: tuple[str, ...]
    """Z components pinned to one constant on every final sample, e.g. "Z1[v1_1] = 0"."""

    samples: tuple[UnifiedPoint, ...]

    def to_document(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "stabilized": self.stabilized,
            "final_level": self.final_level,
            "final_constraints": [to_string(c) for c in self.final_constraints],
            "dimension": self.dimension,
            "exceeds_k": self.exceeds_k,
            "derived_relations": list(self.derived_relations),
            "levels": [level.to_document() for level in self.levels],
        }


def _derived_relations(
    m: FieldModel, outcomes: Sequence[_SampleOutcome], tol: float
) -> tuple[str, ...]:
    if not outcomes:
        return ()
    coords = m.unified_coords
    dim = m.unified_dim
    relations: list[str] = []
    for index in range(m.k * dim):
        if any(o.kernel.size and float(np.max(np.abs(o.kernel[index]))) > tol for o in outcomes):
            continue
        values = np.array([o.solution[index] for o in outcomes])
        if float(np.max(values) - np.min(values)) > tol:
            continue
        a, c = divmod(index, dim)
        value = clean_coefficient(float(np.mean(values)))
        relations.append(f"Z{a + 1}[{coords[c]}] = {format_number(value + 0.0)}")
    return tuple(relations)


def constraint_algorithm(
    m: FieldModel,
    samples: Sequence[UnifiedPoint],
    max_levels: int = DEFAULT_MAX_LEVELS,
    tol: float = DEFAULT_RESIDUAL_TOL,
    *,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
    submanifold_tol: float = DEFAULT_SUBMANIFOLD_TOL,
    projection_max_iter: int = DEFAULT_PROJECTION_MAX_ITER,
    workers: int = 1,
) -> ConstraintReport:
    """Shrink the graph of FL to the points where the unified equation has tangent solutions.

    Level 0 imposes the graph constraints. At each level every sample gets
    the linear system [unified equation + tangency to all current
    constraints]. When all constraint gradients are constant the consistency
    conditions are extracted symbolically from the left kernel; conditions
    that do not vanish on the samples become new constraints and the samples
    are projected onto the enlarged set. Otherwise inconsistent samples are
    dropped and their residuals reported. The loop stops when a level adds
    no constraint and drops no sample, after level ``max_levels``, or when
    every sample has been dropped. The last case is reported as not
    stabilized whether or not that level found new constraints.

    Args:
        m: Field model.
        samples: Points of the graph of FL.
        max_levels: Highest level index attempted.
        tol: Consistency tolerance for residuals and condition values.
        pivot_tol: Relative rank cutoff for the linear systems.
        submanifold_tol: Absolute cutoff for constraint-Jacobian ranks and pinned components.
        projection_max_iter: Gauss-Newton iterations per projection.
        workers: Threads for the per-sample solves.

    Raises:
        ValidationError: No samples were given.
        ConstraintViolationError: A sample is off the graph of FL.
    """
    if not samples:
        raise ValidationError("the constraint algorithm needs at least one sample")
    points = [_unified_array(m, w) for w in samples]
    constraints = graph_constraints(m)
    system = _LevelSystem(m, constraints, pivot_tol, submanifold_tol)
    for w in points:
        off = system.values(w)
        if off.size and float(np.max(np.abs(off))) > tol:
            raise ConstraintViolationError(
                f"sample is {float(np.max(np.abs(off))):.3e} away from the graph of FL"
            )

    levels: list[ConstraintLevel] = []
    outcomes: list[_SampleOutcome] = []
    stabilized = False
    for index in range(max_levels + 1):
        system = _LevelSystem(m, constraints, pivot_tol, submanifold_tol)
        outcomes = map_samples(system.solve, points, workers)
        inconsistent = [o.residual > tol for o in outcomes]
        new: list[Expr] = []
        divergent = False
        if system.symbolic:
            known = {to_string(c) for c in constraints}
            conditions = [c for c in system.conditions(points[0]) if to_string(c) not in known]
            fn = compile_many(conditions, m.unified_coords)
            values = [np.abs(fn(w)) for w in points]
            for j, condition in enumerate(conditions):
                if any(float(v[j]) > tol for v in values):
                    new.append(condition)
            flagged = [bool(v.size) and float(np.max(v)) > tol for v in values]
            divergent = flagged != inconsistent
            if divergent:
                logger.warning(
                    "level %d: symbolic conditions and numeric residuals disagree", index
                )
        elif any(inconsistent):
            logger.warning(
                "level %d: %d of %d samples admit no tangent solution",
                index,
                sum(inconsistent),
                len(points),
            )

        if new:
            enlarged = _LevelSystem(m, constraints + tuple(new), pivot_tol, submanifold_tol)
            projected = [
                _project(enlarged, w, tol, projection_max_iter, pivot_tol) for w in points
            ]
            kept = [w for w in projected if w is not None]
        elif system.symbolic:
            kept = list(points)
        else:
            kept = [w for w, bad in zip(points, inconsistent) if not bad]
        dropped = len(points) - len(kept)

        level = ConstraintLevel(
            index=index,
            constraints=constraints,
            samples=len(points),
            ranks=tuple(o.rank for o in outcomes),
            residuals=tuple(o.residual for o in outcomes),
            jacobian_ranks=tuple(o.jacobian_rank for o in outcomes),
            new_constraints=tuple(new),
            dropped=dropped,
            symbolic=system.symbolic,
            divergent=divergent,
        )
        levels.append(level)
        logger.debug(
            "level %d: %d constraints, %d new, %d of %d samples dropped",
            index,
            len(constraints),
            len(new),
            dropped,
            len(points),
        )
        if not new and dropped == 0:
            stabilized = True
            break
        if not kept:
            logger.warning("constraint algorithm lost every sample at level %d", index)
            outcomes = []
            break
        constraints = constraints + tuple(new)
        points = kept

    last = levels[-1]
    dimension = m.unified_dim - max(last.jacobian_ranks) if last.jacobian_ranks else None
    consistent = [o for o in outcomes if o.residual <= tol]
    report = ConstraintReport(
        model=m.name,
        levels=tuple(levels),
        stabilized=stabilized,
        final_level=last.index,
        final_constraints=last.constraints,
        dimension=dimension,
        exceeds_k=dimension is not None and dimension > m.k,
        derived_relations=_derived_relations(m, consistent, submanifold_tol) if stabilized else (),
        samples=tuple(UnifiedPoint.from_array(w, m.k, m.n) for w in points),
    )
    if not stabilized:
        logger.warning(
            "constraint algorithm did not stabilize for %s after level %d", m.name, last.index
        )
    return report
