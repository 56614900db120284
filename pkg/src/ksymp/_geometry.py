"""Canonical and Lagrangian geometric structures of a field model.

Two-forms are stored as full antisymmetric matrices of expressions, so every
field equation becomes matrix algebra at a point. All of them are produced by a
single routine taking ω = −dθ of a one-form θ = Σ a_j dxʲ, giving the matrix
entries ω_ij = ∂a_i/∂xʲ − ∂a_j/∂xⁱ; for θ_A = pᴬ_i dqⁱ this puts +1 in the
(qⁱ, pᴬ_i) slot of (ω₀)_A.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from ._constants import DEFAULT_PIVOT_TOL, DEFAULT_REGULARITY_TOL, DEFAULT_RESIDUAL_TOL
from ._errors import ModelError, ValidationError
from ._expr import ZERO, Const, Expr, Unary, Var, as_expr, compile_many, diff, simplify
from ._kvector import liouville_fields, stack_points
from ._linalg import null_space
from ._types import (
    FieldModel,
    HamPoint,
    LagPoint,
    Point,
    coordinates,
    p_name,
    point_array,
)

logger = logging.getLogger(__name__)

OneForm = tuple[Expr, ...]


@dataclass(frozen=True, eq=False)
class TwoFormFamily:
    """k antisymmetric coefficient matrices over one space's coordinates."""

    space: str
    k: int
    n: int
    matrices: tuple[tuple[tuple[Expr, ...], ...], ...]

    def __post_init__(self) -> None:
        dim = self.dim
        if len(self.matrices) != self.k or any(
            len(m) != dim or any(len(row) != dim for row in m) for m in self.matrices
        ):
            raise ModelError(f"two-form family needs {self.k} matrices of size {dim}x{dim}")
        if not self.is_antisymmetric():
            raise ModelError("two-form matrices must be stored antisymmetric")

    @property
    def coordinates(self) -> tuple[str, ...]:
        return coordinates(self.space, self.k, self.n)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def is_antisymmetric(self) -> bool:
        """Lower triangle is the simplified negation of the upper; diagonal is zero."""
        for m in self.matrices:
            for i in range(len(m)):
                if m[i][i] != ZERO:
                    return False
                for j in range(i + 1, len(m)):
                    if m[j][i] != simplify(Unary("neg", m[i][j])):
                        return False
        return True

    @property
    def is_constant(self) -> bool:
        return all(isinstance(e, Const) for m in self.matrices for row in m for e in row)

    @cached_property
    def _compiled(self):
        return compile_many(
            [e for m in self.matrices for row in m for e in row], self.coordinates
        )

    def evaluate(self, x: Point | np.ndarray) -> np.ndarray:
        """Numeric matrices at ``x``, shape (k, dim, dim)."""
        return self._compiled(point_array(x)).reshape(self.k, self.dim, self.dim)

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        """Numeric matrices at points given as columns, shape (k, dim, dim, B)."""
        out = self._compiled(np.asarray(xs, dtype=float))
        return out.reshape(self.k, self.dim, self.dim, -1)


def exterior_two_form(one_form: Sequence[Expr], coords: Sequence[str]) -> tuple[tuple[Expr, ...], ...]:
    """Matrix of −dθ for θ = Σ a_j dxʲ with coefficients ``one_form`` over ``coords``."""
    dim = len(coords)
    rows: list[list[Expr]] = [[ZERO] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            entry = simplify(diff(one_form[i], coords[j]) - diff(one_form[j], coords[i]))
            rows[i][j] = entry
            rows[j][i] = simplify(Unary("neg", entry))
    return tuple(tuple(row) for row in rows)


def _family(space: str, k: int, n: int, one_forms: Sequence[OneForm]) -> TwoFormFamily:
    coords = coordinates(space, k, n)
    return TwoFormFamily(space, k, n, tuple(exterior_two_form(t, coords) for t in one_forms))


def _momentum_one_forms(space: str, k: int, n: int) -> tuple[OneForm, ...]:
    dim = len(coordinates(space, k, n))
    forms = []
    for a in range(k):
        coefficients: list[Expr] = [ZERO] * dim
        for i in range(n):
            coefficients[i] = Var(p_name(a, i))
        forms.append(tuple(coefficients))
    return tuple(forms)


# ---------------------------------------------------------------------------
# Forms
# ---------------------------------------------------------------------------


def canonical_one_forms(m: FieldModel) -> tuple[OneForm, ...]:
    """θ_A = pᴬ_i dqⁱ on (T¹ₖ)*Q."""
    return _momentum_one_forms("hamiltonian", m.k, m.n)


def lagrangian_one_forms(m: FieldModel) -> tuple[OneForm, ...]:
    """(θ_L)_A = ∂L/∂vⁱ_A dqⁱ on T¹ₖQ."""
    forms = []
    for a in range(m.k):
        coefficients: list[Expr] = [ZERO] * m.lag_dim
        for i in range(m.n):
            coefficients[i] = m.dL_dv[i * m.k + a]
        forms.append(tuple(coefficients))
    return tuple(forms)


@lru_cache(maxsize=None)
def canonical_family(k: int, n: int) -> TwoFormFamily:
    """(ω₀)_A = dqⁱ∧dpᴬ_i for given (k, n)."""
    return _family("hamiltonian", k, n, _momentum_one_forms("hamiltonian", k, n))


@lru_cache(maxsize=None)
def unified_family(k: int, n: int) -> TwoFormFamily:
    """Ω_A, the pullback of (ω₀)_A to the Whitney sum."""
    return _family("unified", k, n, _momentum_one_forms("unified", k, n))


def canonical_two_forms(m: FieldModel) -> TwoFormFamily:
    """Canonical polysymplectic family on (T¹ₖ)*Q."""
    return canonical_family(m.k, m.n)


@lru_cache(maxsize=64)
def lagrangian_two_forms(m: FieldModel) -> TwoFormFamily:
    """(ω_L)_A = −d(θ_L)_A on T¹ₖQ."""
    return _family("lagrangian", m.k, m.n, lagrangian_one_forms(m))


def unified_two_forms(m: FieldModel) -> TwoFormFamily:
    """Ω_A = pr₂*(ω₀)_A on T¹ₖQ ⊕ (T¹ₖ)*Q."""
    return unified_family(m.k, m.n)


def kernel_intersection_dimension(
    family: TwoFormFamily, x: Point | np.ndarray, tol: float = DEFAULT_PIVOT_TOL
) -> int:
    """Dimension of ∩_A ker ω_A at ``x``."""
    w = family.evaluate(x)
    stacked = w.reshape(family.k * family.dim, family.dim)
    return int(null_space(stacked, tol).shape[1])


# ---------------------------------------------------------------------------
# Legendre map, Hessian, energy
# ---------------------------------------------------------------------------


def legendre(m: FieldModel, x: LagPoint) -> HamPoint:
    """FL(qⁱ, vⁱ_A) = (qⁱ, ∂L/∂vⁱ_A)."""
    m.check_point(x)
    p = m.eval_momenta(x.to_array()).reshape(m.k, m.n)
    return HamPoint(x.q, p)


def legendre_many(m: FieldModel, xs: np.ndarray) -> np.ndarray:
    """FL at points given as columns (lag_dim, B); returns (ham_dim, B)."""
    xs = np.asarray(xs, dtype=float)
    return np.concatenate([xs[: m.n], m.eval_momenta(xs)], axis=0)


def legendre_jacobian(m: FieldModel, x: LagPoint | np.ndarray) -> np.ndarray:
    """Jacobian of FL at ``x``, shape (ham_dim, lag_dim)."""
    return m.eval_jacobian(point_array(x))


def hessian(m: FieldModel, x: LagPoint) -> np.ndarray:
    """∂²L/∂vⁱ_A∂vʲ_B at ``x`` with rows and columns in (i, A) order."""
    m.check_point(x)
    return m.eval_hessian(x.to_array())


@dataclass(frozen=True)
class RegularityReport:
    """Outcome of a regularity scan over sample points."""

    regular: bool
    determinants: tuple[float, ...]
    ranks: tuple[int, ...]
    tolerance: float

    @property
    def min_rank(self) -> int:
        return min(self.ranks)


def is_regular(
    m: FieldModel, samples: Sequence[LagPoint], tol: float = DEFAULT_REGULARITY_TOL
) -> RegularityReport:
    """Check |det H| > ``tol`` at every sample and record determinants and ranks.

    Raises:
        ValidationError: ``samples`` is empty.
    """
    if not samples:
        raise ValidationError("regularity needs at least one sample point")
    determinants = []
    ranks = []
    for x in samples:
        h = hessian(m, x)
        determinants.append(float(np.linalg.det(h)))
        ranks.append(int(np.linalg.matrix_rank(h)))
    regular = all(abs(d) > tol for d in determinants)
    logger.debug("model %s regular=%s min rank=%d", m.name, regular, min(ranks))
    return RegularityReport(regular, tuple(determinants), tuple(ranks), tol)


def energy(m: FieldModel, x: LagPoint) -> float:
    """E_L(x) = Σ vⁱ_A ∂L/∂vⁱ_A − L, by numeric contraction."""
    m.check_point(x)
    arr = x.to_array()
    dldv = m.eval_momenta(arr).reshape(m.k, m.n).T.ravel()
    return float(np.dot(arr[m.n :], dldv) - m.eval_lagrangian(arr))


def energy_expression(m: FieldModel) -> Expr:
    """C(L) − L as an expression, with C = Σ_A C_A the Liouville fields."""
    fields = liouville_fields(m.k, m.n)
    total: Expr = as_expr(0)
    for a in range(m.k):
        total = total + fields.directional_derivative(a, m.lagrangian)
    return simplify(total - m.lagrangian)


# ---------------------------------------------------------------------------
# Pullback identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PullbackCheck:
    """Per-parameter residuals of FL*(ω₀)_A − (ω_L)_A."""

    residuals: tuple[float, ...]
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def pullback_check(
    m: FieldModel, x: LagPoint, tol: float = DEFAULT_RESIDUAL_TOL
) -> PullbackCheck:
    """Compare Jᵀ (ω₀)_A J with (ω_L)_A at ``x``, J the Jacobian of FL."""
    m.check_point(x)
    j = legendre_jacobian(m, x)
    w0 = canonical_two_forms(m).evaluate(legendre(m, x))
    wl = lagrangian_two_forms(m).evaluate(x)
    residuals = tuple(
        float(np.max(np.abs(j.T @ w0[a] @ j - wl[a]))) for a in range(m.k)
    )
    return PullbackCheck(residuals, tol)


def regularity_at(m: FieldModel, xs: Sequence[LagPoint] | np.ndarray, tol: float) -> bool:
    """True iff |det H| > ``tol`` at every sample (points, or a (B, lag_dim) array)."""
    arr = stack_points(xs, m.lag_dim)
    h = m.eval_hessian(arr)
    dets = np.linalg.det(np.moveaxis(h, -1, 0))
    return bool(np.all(np.abs(dets) > tol))
