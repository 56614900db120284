"""Euler-Lagrange machinery on T¹ₖQ.

The second-order field equations reduce, for a second-order k-vector field, to n
linear equations in the nk² accelerations (X_A)ⁱ_B:

    Σ_A ∂²L/∂qʲ∂vⁱ_A vʲ_A + Σ_{A,B} ∂²L/∂vⁱ_A∂vʲ_B (X_A)ʲ_B = ∂L/∂qⁱ

For k > 1 the system is underdetermined. An ansatz restricts the unknowns to the
column space of a basis matrix P with orthonormal columns, and the solver
returns P·c with c the minimum-norm least-squares solution of (M P) c = b.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
import scipy.linalg

from ._constants import DEFAULT_PIVOT_TOL, DEFAULT_RESIDUAL_TOL
from ._errors import DimensionMismatchError, ValidationError
from ._expr import Const, Expr, Var, as_expr, simplify
from ._geometry import lagrangian_two_forms
from ._integrate import Section
from ._kvector import KVectorField, contract, contraction_matrix
from ._linalg import batched_min_norm_solve, clean_coefficient, min_norm_solve, null_space
from ._types import FieldModel, LagPoint, v_name

logger = logging.getLogger(__name__)

AnsatzName = Literal["symmetric", "uniform"]
Ansatz = Union[AnsatzName, np.ndarray]


# ---------------------------------------------------------------------------
# Euler-Lagrange residual
# ---------------------------------------------------------------------------


def el_residual(m: FieldModel, phi: Section) -> np.ndarray:
    """Left side minus right side of the Euler-Lagrange equations at every node.

    Uses the chain-rule expansion

        Σ_A [∂²L/∂qʲ∂vⁱ_A ∂φʲ/∂t^A + Σ_B ∂²L/∂vʲ_B∂vⁱ_A ∂²φʲ/∂t^A∂t^B] − ∂L/∂qⁱ

    Args:
        m: Field model.
        phi: Section over Q carrying first and second derivatives.

    Returns:
        Array of shape ``grid.shape + (n,)``; NaN where ``phi`` is undefined.

    Raises:
        MissingDerivativeError: ``phi`` lacks first or second derivatives.
    """
    if phi.space != "configuration" or phi.k != m.k or phi.n != m.n:
        raise DimensionMismatchError("el_residual needs a section over Q matching the model")
    first = phi.require_first().reshape(-1, m.k, m.n)
    second = phi.require_second().reshape(-1, m.k, m.k, m.n)
    q = phi.values.reshape(-1, m.n)
    nodes = q.shape[0]
    velocities = np.swapaxes(first, 1, 2).reshape(nodes, m.n * m.k)
    points = np.concatenate([q, velocities], axis=1).T
    finite = (
        np.all(np.isfinite(points), axis=0)
        & np.all(np.isfinite(second.reshape(nodes, -1)), axis=1)
    )
    out = np.full((m.n, nodes), np.nan)
    if finite.any():
        x = points[:, finite]
        mixed = m.eval_mixed(x).reshape(m.n, m.n, m.k, -1)
        hess = m.eval_hessian(x).reshape(m.n, m.k, m.n, m.k, -1)
        term1 = np.einsum("jiab,baj->ib", mixed, first[finite])
        term2 = np.einsum("iajcb,bacj->ib", hess, second[finite])
        out[:, finite] = term1 + term2 - m.eval_dq(x)
    return out.T.reshape(phi.grid.shape + (m.n,))


# ---------------------------------------------------------------------------
# Ansatz bases
# ---------------------------------------------------------------------------


def _unknown(m: FieldModel, a: int, i: int, b: int) -> int:
    """Flat position of (X_A)ⁱ_B among the nk² accelerations."""
    return a * m.n * m.k + i * m.k + b


def symmetric_ansatz(m: FieldModel) -> np.ndarray:
    """Orthonormal basis of accelerations with (X_A)ⁱ_B = (X_B)ⁱ_A."""
    columns = []
    size = m.n * m.k * m.k
    for i in range(m.n):
        for a in range(m.k):
            for b in range(a, m.k):
                col = np.zeros(size)
                if a == b:
                    col[_unknown(m, a, i, a)] = 1.0
                else:
                    col[_unknown(m, a, i, b)] = col[_unknown(m, b, i, a)] = 1.0 / math.sqrt(2.0)
                columns.append(col)
    return np.stack(columns, axis=1)


def uniform_ansatz(m: FieldModel) -> np.ndarray:
    """Orthonormal basis of accelerations with (X_A)ⁱ_B = aⁱ for every A and B.

    Plane waves φ(t¹ + ... + tᵏ) are integral sections of fields in this family.
    """
    size = m.n * m.k * m.k
    columns = []
    for i in range(m.n):
        col = np.zeros(size)
        for a in range(m.k):
            for b in range(m.k):
                col[_unknown(m, a, i, b)] = 1.0 / m.k
        columns.append(col)
    return np.stack(columns, axis=1)


def weighted_ansatz(m: FieldModel, weights: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space of a user matrix over the accelerations.

    Args:
        m: Field model.
        weights: Matrix with nk² rows in (A, i, B) order whose columns span the
            admissible accelerations.

    Raises:
        DimensionMismatchError: ``weights`` has the wrong number of rows.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    size = m.n * m.k * m.k
    if weights.shape[0] != size:
        raise DimensionMismatchError(f"ansatz matrix needs {size} rows, got {weights.shape[0]}")
    return scipy.linalg.orth(weights)


def ansatz_basis(m: FieldModel, ansatz: Ansatz) -> np.ndarray:
    if isinstance(ansatz, str):
        if ansatz == "symmetric":
            return symmetric_ansatz(m)
        if ansatz == "uniform":
            return uniform_ansatz(m)
        raise ValidationError(f"unknown ansatz {ansatz!r}; use 'symmetric', 'uniform' or a matrix")
    return weighted_ansatz(m, ansatz)


def ansatz_label(ansatz: Ansatz) -> str:
    return ansatz if isinstance(ansatz, str) else "user"


# ---------------------------------------------------------------------------
# SOPDE solutions
# ---------------------------------------------------------------------------


def _system(m: FieldModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched system matrices (B, n, nk²) and right sides (B, n) at columns of ``x``."""
    nk = m.n * m.k
    hess = m.eval_hessian(x)
    mixed = m.eval_mixed(x).reshape(m.n, m.n, m.k, -1)
    velocities = x[m.n :].reshape(m.n, m.k, -1)
    batch = x.shape[1]
    matrix = np.moveaxis(hess.reshape(m.n, m.k, nk, batch), -1, 0).reshape(batch, m.n, m.k * nk)
    rhs = m.eval_dq(x) - np.einsum("jiab,jab->ib", mixed, velocities)
    return matrix, rhs.T


@dataclass(frozen=True, eq=False)
class SopdeSolution:
    """Accelerations of a SOPDE at one point."""

    accelerations: np.ndarray
    """``accelerations[A, i, B]`` is (X_A)ⁱ_B."""

    residual: float
    """Sup-norm of the equation residual."""

    consistent: bool
    rank: int
    ansatz: str

    def field_values(self, x: LagPoint) -> np.ndarray:
        """Coefficients (k, lag_dim) of the SOPDE at ``x``."""
        k, n = x.k, x.n
        values = np.zeros((k, n + n * k))
        for a in range(k):
            values[a, :n] = x.v[:, a]
            values[a, n:] = self.accelerations[a].ravel()
        return values


def sopde_solve(
    m: FieldModel,
    x: LagPoint,
    ansatz: Ansatz = "symmetric",
    tol: float = DEFAULT_RESIDUAL_TOL,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
) -> SopdeSolution:
    """Solve the second-order Euler-Lagrange system at ``x`` within an ansatz.

    Inconsistent systems (possible for singular Lagrangians) are reported with
    ``consistent=False`` and the least-squares solution.
    """
    m.check_point(x)
    basis = ansatz_basis(m, ansatz)
    matrix, rhs = _system(m, x.to_array()[:, None])
    result = min_norm_solve(matrix[0] @ basis, rhs[0], pivot_tol)
    solution = basis @ result.solution
    residual = float(np.max(np.abs(matrix[0] @ solution - rhs[0]))) if rhs.size else 0.0
    consistent = residual <= tol
    if not consistent:
        logger.warning("SOPDE system inconsistent at %s (residual %.3e)", x.to_array(), residual)
    return SopdeSolution(
        solution.reshape(m.k, m.n, m.k), residual, consistent, result.rank, ansatz_label(ansatz)
    )


def _rhs_exprs(m: FieldModel) -> list[Expr]:
    rows = []
    for i in range(m.n):
        total: Expr = m.dL_dq[i]
        for a in range(m.k):
            for j in range(m.n):
                total = total - m.d2L_dqdv[j][i * m.k + a] * Var(v_name(j, a))
        rows.append(simplify(total))
    return rows


def _velocity_rows(m: FieldModel) -> list[list[Expr]]:
    rows: list[list[Expr]] = []
    for a in range(m.k):
        row: list[Expr] = [Var(v_name(i, a)) for i in range(m.n)]
        rows.append(row)
    return rows


def sopde_field(
    m: FieldModel, ansatz: Ansatz = "symmetric", pivot_tol: float = DEFAULT_PIVOT_TOL
) -> KVectorField:
    """The pointwise SOPDE solution as a k-vector field on T¹ₖQ.

    When the velocity Hessian is constant the minimum-norm solution operator is
    a constant matrix, and the field is returned with symbolic components.
    Otherwise the field solves the system at every evaluation.
    """
    basis = ansatz_basis(m, ansatz)
    label = f"sopde[{ansatz_label(ansatz)}]"
    if all(isinstance(e, Const) for row in m.d2L_dvdv for e in row):
        nk = m.n * m.k
        hess = np.array([[e.value for e in row] for row in m.d2L_dvdv])  # type: ignore[attr-defined]
        matrix = hess.reshape(m.n, m.k, nk).reshape(m.n, m.k * nk)
        solver = basis @ np.linalg.pinv(matrix @ basis, rcond=pivot_tol)
        rhs = _rhs_exprs(m)
        rows = _velocity_rows(m)
        for a in range(m.k):
            for i in range(m.n):
                for b in range(m.k):
                    total: Expr = as_expr(0)
                    for l, b_l in enumerate(rhs):
                        c = clean_coefficient(solver[_unknown(m, a, i, b), l])
                        if c != 0.0:
                            total = total + Const(c) * b_l
                    rows[a].append(simplify(total))
        logger.debug("symbolic %s field for model %s", label, m.name)
        return KVectorField.from_exprs("lagrangian", m.k, m.n, rows, label=label)

    def evaluate(x: np.ndarray) -> np.ndarray:
        single = x.ndim == 1
        cols = x[:, None] if single else x
        matrix, rhs = _system(m, cols)
        coeffs = batched_min_norm_solve(matrix @ basis, rhs, pivot_tol)
        acc = (coeffs @ basis.T).reshape(-1, m.k, m.n * m.k)
        out = np.empty((m.k, m.lag_dim, cols.shape[1]))
        velocities = cols[m.n :].reshape(m.n, m.k, -1)
        for a in range(m.k):
            out[a, : m.n] = velocities[:, a]
            out[a, m.n :] = acc[:, a].T
        return out[..., 0] if single else out

    return KVectorField.from_function("lagrangian", m.k, m.n, evaluate, label=label)


# ---------------------------------------------------------------------------
# Geometric equation
# ---------------------------------------------------------------------------


def lag_geoeq_residual(m: FieldModel, X: KVectorField, x: LagPoint) -> np.ndarray:
    """Σ_A ι_{X_A}(ω_L)_A − dE_L at ``x``, a covector over T¹ₖQ coordinates."""
    m.check_point(x)
    return contract(lagrangian_two_forms(m), X, x) - m.eval_energy_gradient(x.to_array())


@dataclass(frozen=True, eq=False)
class GeometricSolutions:
    """Solution family of the Lagrangian geometric equation at one point."""

    particular: np.ndarray
    """Minimum-norm solution, shape (k, lag_dim)."""

    kernel: np.ndarray
    """Orthonormal kernel basis of the contraction map, shape (k*lag_dim, r)."""

    residual: float
    rank: int

    def base_components_fixed(self, x: LagPoint, tol: float = DEFAULT_RESIDUAL_TOL) -> bool:
        """True iff every solution has (X_A)ⁱ = vⁱ_A at ``x``."""
        k, n = x.k, x.n
        dim = n + n * k
        base = [a * dim + i for a in range(k) for i in range(n)]
        target = np.array([x.v[i, a] for a in range(k) for i in range(n)])
        particular = self.particular.ravel()[base]
        drift = np.max(np.abs(self.kernel[base])) if self.kernel.size else 0.0
        return bool(np.max(np.abs(particular - target)) <= tol and drift <= tol)


def lag_geoeq_solutions(
    m: FieldModel, x: LagPoint, pivot_tol: float = DEFAULT_PIVOT_TOL
) -> GeometricSolutions:
    """Particular solution and kernel of the full geometric equation at ``x``."""
    m.check_point(x)
    matrix = contraction_matrix(lagrangian_two_forms(m), x)
    result = min_norm_solve(matrix, m.eval_energy_gradient(x.to_array()), pivot_tol)
    kernel = null_space(matrix, pivot_tol)
    return GeometricSolutions(
        result.solution.reshape(m.k, m.lag_dim), kernel, result.residual, result.rank
    )


def zero_acceleration_field(m: FieldModel) -> KVectorField:
    """SOPDE with (X_A)ⁱ = vⁱ_A and vanishing accelerations."""
    rows = _velocity_rows(m)
    for row in rows:
        row.extend([as_expr(0)] * (m.n * m.k))
    return KVectorField.from_exprs("lagrangian", m.k, m.n, rows, label="zero-acceleration")

