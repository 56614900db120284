"""The field operator 𝒦: a k-vector field along the Legendre map.

𝒦 assigns to each point x of T¹ₖQ a k-tuple of tangent vectors of (T¹ₖ)*Q at
FL(x). Coefficients are therefore stored as functions of (q, v) with values
in (T¹ₖ)*Q coordinates; lying over FL is built into that representation.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._constants import DEFAULT_RESIDUAL_TOL, DEFAULT_SUBMANIFOLD_TOL
from ._errors import DimensionMismatchError, ModelError, ValidationError
from ._expr import (
    ZERO,
    Expr,
    ExprLike,
    Var,
    as_expr,
    compile_many,
    is_zero,
    simplify,
    substitute,
    to_string,
)
from ._geometry import canonical_family, legendre_many
from ._integrate import Section
from ._kvector import KVectorField, stack_points
from ._types import FieldModel, LagPoint, coordinates, p_index, point_array, v_index, v_name
from ._workers import map_samples

logger = logging.getLogger(__name__)

OperatorFunction = Callable[[np.ndarray], np.ndarray]


class FieldOperatorK:
    """k-vector field along FL, coefficients (k, dim (T¹ₖ)*Q) as functions on T¹ₖQ.

    Args:
        k: Number of field parameters.
        n: Number of field components.
        components: k rows of expressions in T¹ₖQ coordinates, one entry per
            (T¹ₖ)*Q coordinate.
        function: Alternatively, a map from (lag_dim,) / (lag_dim, B) arrays to
            (k, ham_dim) / (k, ham_dim, B) arrays.
        constraints: Expressions over the Whitney-sum coordinates cutting out
            the submanifold on which the operator is meant to hold.
        label: Name used in logs and reports.
    """

    def __init__(
        self,
        k: int,
        n: int,
        components: Sequence[Sequence[ExprLike]] | None = None,
        function: OperatorFunction | None = None,
        constraints: Sequence[ExprLike] = (),
        label: str = "",
    ) -> None:
        if (components is None) == (function is None):
            raise ValidationError("give exactly one of components or function")
        self.k = k
        self.n = n
        self.label = label
        self.constraints = tuple(as_expr(c) for c in constraints)
        self._function = function
        self._components: tuple[tuple[Expr, ...], ...] | None = None
        if components is not None:
            rows = tuple(tuple(as_expr(c) for c in row) for row in components)
            width = len(self.target_coordinates)
            if len(rows) != k or any(len(row) != width for row in rows):
                raise DimensionMismatchError(f"expected {k} rows of {width} components")
            allowed = set(self.coordinates)
            for row in rows:
                for c in row:
                    stray = c.free_variables - allowed
                    if stray:
                        raise ModelError(
                            "operator components must be functions of (q, v), found "
                            + ", ".join(sorted(stray))
                        )
            self._components = rows

    @classmethod
    def from_exprs(
        cls,
        k: int,
        n: int,
        components: Sequence[Sequence[ExprLike]],
        constraints: Sequence[ExprLike] = (),
        label: str = "",
    ) -> FieldOperatorK:
        return cls(k, n, components=components, constraints=constraints, label=label)

    @classmethod
    def from_function(
        cls,
        k: int,
        n: int,
        function: OperatorFunction,
        constraints: Sequence[ExprLike] = (),
        label: str = "",
    ) -> FieldOperatorK:
        return cls(k, n, function=function, constraints=constraints, label=label)

    @property
    def coordinates(self) -> tuple[str, ...]:
        """Coordinates the coefficients depend on."""
        return coordinates("lagrangian", self.k, self.n)

    @property
    def target_coordinates(self) -> tuple[str, ...]:
        """Coordinates of the tangent vectors."""
        return coordinates("hamiltonian", self.k, self.n)

    @property
    def is_symbolic(self) -> bool:
        return self._components is not None

    @property
    def components(self) -> tuple[tuple[Expr, ...], ...]:
        if self._components is None:
            raise ValidationError(f"operator {self.label or '<anonymous>'} is not symbolic")
        return self._components

    @cached_property
    def _compiled(self) -> OperatorFunction:
        flat = compile_many([c for row in self.components for c in row], self.coordinates)
        k, width = self.k, len(self.target_coordinates)

        def evaluate(x: np.ndarray) -> np.ndarray:
            out = flat(x)
            return out.reshape((k, width, *out.shape[1:]))

        return evaluate

    def _call(self, xs: np.ndarray) -> np.ndarray:
        fn = self._compiled if self._function is None else self._function
        return np.asarray(fn(xs), dtype=float)

    def evaluate(self, x: LagPoint | np.ndarray) -> np.ndarray:
        """Coefficients at one point of T¹ₖQ, shape (k, ham_dim)."""
        arr = point_array(x)
        if arr.shape != (len(self.coordinates),):
            raise DimensionMismatchError(
                f"expected {len(self.coordinates)} coordinates, got shape {arr.shape}"
            )
        return self._call(arr)

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        """Coefficients at the columns of ``xs`` (lag_dim, B), shape (k, ham_dim, B)."""
        return self._call(np.asarray(xs, dtype=float))

    def describe(self) -> list[str]:
        lines: list[str] = []
        for a, row in enumerate(self.components):
            for name, c in zip(self.target_coordinates, row):
                lines.append(f"K{a + 1}[{name}] = {to_string(c)}")
        return lines


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def default_k(m: FieldModel) -> FieldOperatorK:
    """(𝒦_A)ⁱ = vⁱ_A and (𝒦_A)ᴮ_i = δᴬᴮ ∂L/∂qⁱ / k."""
    k, n = m.k, m.n
    rows: list[list[Expr]] = []
    for a in range(k):
        row: list[Expr] = [Var(v_name(i, a)) for i in range(n)]
        for b in range(k):
            for i in range(n):
                row.append(simplify(m.dL_dq[i] / k) if a == b else ZERO)
        rows.append(row)
    return FieldOperatorK.from_exprs(k, n, rows, label="default")


def k_from_sopde(m: FieldModel, XL: KVectorField) -> FieldOperatorK:
    """𝒦_A = T(FL)(X_A): push each X_A through the Jacobian of FL.

    Validity is not enforced; :func:`verify_k` reports whether the result is a
    field operator.
    """
    if XL.space != "lagrangian" or XL.k != m.k or XL.n != m.n:
        raise DimensionMismatchError("expected a field on T1kQ with the model's (k, n)")
    label = f"T(FL)({XL.label})" if XL.label else "from-sopde"
    if XL.is_symbolic:
        jac = m.legendre_jacobian_exprs
        rows: list[list[Expr]] = []
        for a in range(m.k):
            comp = XL.component(a)
            row: list[Expr] = []
            for jrow in jac:
                total: Expr = ZERO
                for entry, x_l in zip(jrow, comp):
                    if not is_zero(entry) and not is_zero(x_l):
                        total = total + entry * x_l
                row.append(simplify(total))
            rows.append(row)
        return FieldOperatorK.from_exprs(m.k, m.n, rows, label=label)

    def function(xs: np.ndarray) -> np.ndarray:
        single = xs.ndim == 1
        cols = xs[:, None] if single else xs
        out = np.einsum("rlb,alb->arb", m.eval_jacobian(cols), XL.evaluate_many(cols))
        return out[..., 0] if single else out

    return FieldOperatorK.from_function(m.k, m.n, function, label=label)


def k_from_hamiltonian(
    m: FieldModel, X0: KVectorField, constraints: Sequence[ExprLike] = ()
) -> FieldOperatorK:
    """𝒦_A = (X₀)_A ∘ FL, re-expressed over (q, v) through p = ∂L/∂v.

    The result always lies over FL but need not be second order.
    """
    if X0.space != "hamiltonian" or X0.k != m.k or X0.n != m.n:
        raise DimensionMismatchError("expected a field on (T1k)*Q with the model's (k, n)")
    label = f"{X0.label}∘FL" if X0.label else "from-hamiltonian"
    if X0.is_symbolic:
        rows = [
            [substitute(c, m.graph_substitution) for c in X0.component(a)] for a in range(m.k)
        ]
        return FieldOperatorK.from_exprs(m.k, m.n, rows, constraints=constraints, label=label)

    def function(xs: np.ndarray) -> np.ndarray:
        if xs.ndim == 1:
            return X0.evaluate(legendre_many(m, xs[:, None])[:, 0])
        return X0.evaluate_many(legendre_many(m, xs))

    return FieldOperatorK.from_function(m.k, m.n, function, constraints=constraints, label=label)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KVerification:
    """Residuals of the three defining conditions of a field operator."""

    structural: bool
    """Lies over FL; holds by representation."""

    field_eq_residuals: tuple[float, ...]
    """Per sample: sup-norm of Jᵀ Σ_A ι_{𝒦_A}(ω₀)_A − dE_L."""

    second_order_residual: float
    kl_residual: float
    """max |Σ_A (𝒦_A)ᴬ_i − ∂L/∂qⁱ|."""

    tolerance: float
    samples_used: int
    samples_skipped: int
    """Samples discarded for lying off the operator's constraint set."""

    @property
    def field_eq_residual(self) -> float:
        return max(self.field_eq_residuals, default=0.0)

    @property
    def field_equation(self) -> bool:
        return self.field_eq_residual <= self.tolerance

    @property
    def second_order(self) -> bool:
        return self.second_order_residual <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.structural and self.field_equation and self.second_order

    def conditions(self) -> dict[str, bool]:
        return {
            "structural": self.structural,
            "field_equation": self.field_equation,
            "second_order": self.second_order,
        }


def _on_constraint_set(m: FieldModel, K: FieldOperatorK, xs: np.ndarray, tol: float) -> np.ndarray:
    if not K.constraints:
        return np.ones(xs.shape[1], dtype=bool)
    ws = np.concatenate([xs, m.eval_momenta(xs)], axis=0)
    values = compile_many(K.constraints, m.unified_coords)(ws)
    return np.all(np.abs(values) <= tol, axis=0)


def _residual_block(m: FieldModel, K: FieldOperatorK, xs: np.ndarray) -> tuple[np.ndarray, ...]:
    k, n = m.k, m.n
    values = K.evaluate_many(xs)
    omega = canonical_family(k, n).evaluate(np.zeros(m.ham_dim))
    covector = np.einsum("aib,aij->jb", values, omega)
    field_eq = np.einsum("rlb,rb->lb", m.eval_jacobian(xs), covector) - m.eval_energy_gradient(xs)
    base = np.stack([values[a, :n] for a in range(k)])
    velocities = np.stack([xs[[v_index(n, k, i, a) for i in range(n)]] for a in range(k)])
    trace = sum(values[a, [p_index(n, k, a, i) for i in range(n)]] for a in range(k))
    kl = trace - m.eval_dq(xs)
    return np.max(np.abs(field_eq), axis=0), base - velocities, kl


def verify_k(
    m: FieldModel,
    K: FieldOperatorK,
    samples: Sequence[LagPoint] | np.ndarray,
    tol: float = DEFAULT_RESIDUAL_TOL,
    *,
    constraint_tol: float = DEFAULT_SUBMANIFOLD_TOL,
    workers: int = 1,
) -> KVerification:
    """Check the defining conditions of a field operator at ``samples``.

    When ``K`` carries constraints, samples whose graph point violates them by
    more than ``constraint_tol`` are skipped.

    Args:
        m: Field model.
        K: Candidate operator.
        samples: Points of T¹ₖQ.
        tol: Pass threshold for every residual.
        constraint_tol: Largest constraint value for a sample to count as on S.
        workers: Threads for evaluating sample chunks.
    """
    if K.k != m.k or K.n != m.n:
        raise DimensionMismatchError("operator and model disagree on (k, n)")
    xs = stack_points(samples, m.lag_dim)
    keep = _on_constraint_set(m, K, xs, constraint_tol)
    skipped = int(np.sum(~keep))
    if skipped:
        logger.debug("verify_k: %d samples lie off the constraint set", skipped)
    xs = xs[:, keep]
    if xs.shape[1] == 0:
        logger.warning("verify_k: no sample left to check")
        return KVerification(True, (), 0.0, 0.0, tol, 0, skipped)
    chunks = [c for c in np.array_split(xs, max(1, workers), axis=1) if c.shape[1]]
    blocks = map_samples(lambda chunk: _residual_block(m, K, chunk), chunks, workers)
    field_eq = np.concatenate([b[0] for b in blocks])
    second = np.concatenate([b[1] for b in blocks], axis=-1)
    kl = np.concatenate([b[2] for b in blocks], axis=-1)
    result = KVerification(
        structural=True,
        field_eq_residuals=tuple(float(r) for r in field_eq),
        second_order_residual=float(np.max(np.abs(second))) if second.size else 0.0,
        kl_residual=float(np.max(np.abs(kl))) if kl.size else 0.0,
        tolerance=tol,
        samples_used=int(xs.shape[1]),
        samples_skipped=skipped,
    )
    logger.debug(
        "verify_k %s: field %.3e, second order %.3e, kl %.3e",
        K.label or "operator",
        result.field_eq_residual,
        result.second_order_residual,
        result.kl_residual,
    )
    return result


def k_integral_residual(m: FieldModel, K: FieldOperatorK, psi: Section) -> np.ndarray:
    """J_FL(ψ)·∂ψ/∂t^A − 𝒦_A(ψ) at every node, shape ``grid.shape + (k * ham_dim,)``.

    Raises:
        MissingDerivativeError: ``psi`` carries no first derivatives.
    """
    if psi.space != "lagrangian" or psi.k != m.k or psi.n != m.n:
        raise DimensionMismatchError("expected a section of T1kQ with the model's (k, n)")
    first = psi.require_first()
    xs = psi.flat_nodes()
    count = xs.shape[1]
    pushed = np.einsum("rlb,bal->bar", m.eval_jacobian(xs), first.reshape(count, m.k, m.lag_dim))
    values = np.moveaxis(K.evaluate_many(xs), -1, 0)
    return (pushed - values).reshape(psi.grid.shape + (m.k * m.ham_dim,))
