"""Hamilton-De Donder-Weyl machinery on (T¹ₖ)*Q.

Covers the HDW residuals of sections, the geometric equation Σ ι_{X_A}(ω₀)_A = dH,
Newton inversion of the Legendre map, Hamiltonians defined implicitly through
that inversion, the pushforward of Lagrangian k-vector fields and the
restricted equation on the image of an almost-regular Legendre map.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._constants import (
    DEFAULT_GRADIENT_STEP,
    DEFAULT_NEWTON_DAMPING,
    DEFAULT_NEWTON_MAX_HALVINGS,
    DEFAULT_NEWTON_MAX_ITER,
    DEFAULT_NEWTON_TOL,
    DEFAULT_PIVOT_TOL,
    DEFAULT_SUBMANIFOLD_TOL,
)
from ._errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    EvaluationError,
    NonConvergenceError,
    SingularHessianError,
    ValidationError,
)
from ._expr import Const, Expr, as_expr, compile_many, gradient, simplify
from ._geometry import canonical_family
from ._integrate import Section
from ._kvector import KVectorField, contract
from ._linalg import min_norm_solve, null_space, numeric_rank
from ._types import FieldModel, HamPoint, LagPoint, coordinates

logger = logging.getLogger(__name__)


@lru_cache(maxsize=128)
def _compiled_gradient(e: Expr, coords: tuple[str, ...]):
    return compile_many(gradient(e, coords), coords)


@lru_cache(maxsize=128)
def _compiled_values(exprs: tuple[Expr, ...], coords: tuple[str, ...]):
    return compile_many(exprs, coords)


def _hamiltonian_expr(H: Expr | str, k: int, n: int) -> Expr:
    H = as_expr(H)
    stray = H.free_variables - set(coordinates("hamiltonian", k, n))
    if stray:
        raise ValidationError(f"Hamiltonian uses variables outside (q, p): {', '.join(sorted(stray))}")
    return H


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def hdw_residual(H: Expr | str, psi: Section) -> np.ndarray:
    """HDW residuals at every node, shape ``grid.shape + (n + nk,)``.

    The first n entries are ∂H/∂qⁱ + Σ_A ∂ψᴬ_i/∂t^A, the remaining nk are
    ∂H/∂pᴬ_i − ∂ψⁱ/∂t^A in (A, i) order.

    Raises:
        MissingDerivativeError: ``psi`` carries no first derivatives.
    """
    if psi.space != "hamiltonian":
        raise DimensionMismatchError("hdw_residual needs a section on (T1k)*Q")
    k, n = psi.k, psi.n
    coords = coordinates("hamiltonian", k, n)
    H = _hamiltonian_expr(H, k, n)
    first = psi.require_first().reshape(-1, k, psi.dim)
    nodes = psi.flat_nodes()
    finite = np.all(np.isfinite(nodes), axis=0)
    out = np.full((n + n * k, nodes.shape[1]), np.nan)
    if finite.any():
        grad = _compiled_gradient(H, coords)(nodes[:, finite])
        d = first[finite]
        divergence = sum(d[:, a, n + a * n : n + (a + 1) * n] for a in range(k)).T
        out[:n, finite] = grad[:n] + divergence
        base = np.concatenate([d[:, a, :n] for a in range(k)], axis=1).T
        out[n:, finite] = grad[n:] - base
    return out.T.reshape(psi.grid.shape + (n + n * k,))


def ham_geoeq_residual(H: Expr | str, X: KVectorField, y: HamPoint) -> np.ndarray:
    """Σ_A ι_{X_A}(ω₀)_A − dH at ``y``."""
    H = _hamiltonian_expr(H, y.k, y.n)
    coords = coordinates("hamiltonian", y.k, y.n)
    return contract(canonical_family(y.k, y.n), X, y) - _compiled_gradient(H, coords)(y.to_array())


def hamiltonian_kvector_field(H: Expr | str, k: int, n: int) -> KVectorField:
    """Symbolic solution of the geometric equation in the diagonal gauge.

    (X_A)ⁱ = ∂H/∂pᴬ_i and (X_A)ᴮ_i = −(1/k) ∂H/∂qⁱ δ_AB.
    """
    H = _hamiltonian_expr(H, k, n)
    coords = coordinates("hamiltonian", k, n)
    grad = gradient(H, coords)
    rows: list[list[Expr]] = []
    for a in range(k):
        row: list[Expr] = [grad[n + a * n + i] for i in range(n)]
        for b in range(k):
            for i in range(n):
                row.append(simplify(Const(-1.0 / k) * grad[i]) if a == b else Const(0.0))
        rows.append(row)
    return KVectorField.from_exprs("hamiltonian", k, n, rows, label="hamiltonian")


# ---------------------------------------------------------------------------
# Legendre inversion
# ---------------------------------------------------------------------------


def _velocity_gradient(m: FieldModel, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """∂L/∂vⁱ_A in (i, A) order."""
    x = np.concatenate([q, v])
    return m.eval_momenta(x).reshape(m.k, m.n).T.ravel()


def invert_legendre(
    m: FieldModel,
    y: HamPoint,
    guess: LagPoint | None = None,
    tol: float = DEFAULT_NEWTON_TOL,
    max_iter: int = DEFAULT_NEWTON_MAX_ITER,
    *,
    allow_singular: bool = False,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
) -> LagPoint:
    """Newton iteration for FL(x) = y along the fibre over y's base point.

    Solves ∂L/∂v(q, v) = p with the velocity Hessian as Jacobian; a step whose
    residual does not decrease is halved, up to a fixed number of times.

    Args:
        m: Field model.
        y: Target point of (T¹ₖ)*Q.
        guess: Starting point; v = 0 over y's base point by default.
        tol: Sup-norm target for ∂L/∂v − p.
        max_iter: Iteration cap.
        allow_singular: Take minimum-norm steps instead of failing when the
            Hessian is singular. This picks a preimage on a fibre of an
            almost-regular Legendre map.
        pivot_tol: Relative singular-value cutoff for singularity.

    Returns:
        A point x with ``‖legendre(m, x) − y‖∞ ≤ tol``.

    Raises:
        SingularHessianError: The Hessian is singular and ``allow_singular`` is False.
        NonConvergenceError: No convergence within ``max_iter`` iterations, or
            no step decreases the residual.
    """
    if y.k != m.k or y.n != m.n:
        raise DimensionMismatchError(f"point has (k={y.k}, n={y.n}) but the model has (k={m.k}, n={m.n})")
    q = y.q
    target = y.p.T.ravel()
    v = np.zeros(m.n * m.k) if guess is None else guess.to_array()[m.n :].copy()

    def residual_of(vel: np.ndarray) -> np.ndarray:
        return _velocity_gradient(m, q, vel) - target

    f = residual_of(v)
    norm = float(np.max(np.abs(f)))
    for iteration in range(max_iter):
        if norm <= tol:
            return LagPoint(q, v.reshape(m.n, m.k))
        jac = m.eval_hessian(np.concatenate([q, v]))
        singular_values = np.linalg.svd(jac, compute_uv=False)
        singular = singular_values[-1] <= pivot_tol * max(1.0, float(singular_values[0]))
        if singular and not allow_singular:
            raise SingularHessianError(
                f"singular Hessian during Legendre inversion (smallest singular value {singular_values[-1]:.3e})",
                iterations=iteration,
                residual=norm,
            )
        if singular:
            step = min_norm_solve(jac, -f, pivot_tol).solution
        else:
            step = np.linalg.solve(jac, -f)
        scale = 1.0
        for _ in range(DEFAULT_NEWTON_MAX_HALVINGS):
            trial = v + scale * step
            try:
                f_trial = residual_of(trial)
                trial_norm = float(np.max(np.abs(f_trial)))
            except EvaluationError:
                trial_norm = np.inf
            if trial_norm < norm or trial_norm <= tol:
                v, f, norm = trial, f_trial, trial_norm
                break
            scale *= DEFAULT_NEWTON_DAMPING
        else:
            raise NonConvergenceError(
                "Legendre inversion stalled: no damped step decreases the residual",
                iterations=iteration,
                residual=norm,
            )
    if norm <= tol:
        return LagPoint(q, v.reshape(m.n, m.k))
    raise NonConvergenceError(
        f"Legendre inversion did not converge in {max_iter} iterations (residual {norm:.3e})",
        iterations=max_iter,
        residual=norm,
    )


class ImplicitHamiltonian:
    """H = E_L∘FL⁻¹, evaluated through Newton inversion.

    The gradient is a central finite difference through the inversion.

    Example:
        >>> H = ImplicitHamiltonian(model)
        >>> H.value(HamPoint([0.3], [[1.0], [2.0]]))
    """

    def __init__(
        self,
        m: FieldModel,
        guess: LagPoint | None = None,
        step: float = DEFAULT_GRADIENT_STEP,
        tol: float = DEFAULT_NEWTON_TOL,
        max_iter: int = DEFAULT_NEWTON_MAX_ITER,
    ) -> None:
        self.model = m
        self.guess = guess
        self.step = step
        self.tol = tol
        self.max_iter = max_iter

    def preimage(self, y: HamPoint) -> LagPoint:
        return invert_legendre(self.model, y, self.guess, self.tol, self.max_iter)

    def value(self, y: HamPoint) -> float:
        x = self.preimage(y)
        return float(self.model.eval_energy(x.to_array()))

    __call__ = value

    def gradient(self, y: HamPoint) -> np.ndarray:
        """dH at ``y`` over (T¹ₖ)*Q coordinates."""
        base = y.to_array()
        out = np.empty_like(base)
        for c in range(base.size):
            shift = np.zeros_like(base)
            shift[c] = self.step
            plus = self.value(HamPoint.from_array(base + shift, y.k, y.n))
            minus = self.value(HamPoint.from_array(base - shift, y.k, y.n))
            out[c] = (plus - minus) / (2.0 * self.step)
        return out


# ---------------------------------------------------------------------------
# Pushforward
# ---------------------------------------------------------------------------


def pushforward_XH(
    m: FieldModel, XL: KVectorField, y: HamPoint, guess: LagPoint | None = None
) -> np.ndarray:
    """(X_H)_A(y) = J_FL(x)·(X_L)_A(x) with x = FL⁻¹(y); shape (k, ham_dim)."""
    if XL.space != "lagrangian":
        raise DimensionMismatchError("pushforward needs a field on T1kQ")
    x = invert_legendre(m, y, guess)
    jac = m.eval_jacobian(x.to_array())
    return XL.evaluate(x) @ jac.T


def pushforward_field(m: FieldModel, XL: KVectorField, guess: LagPoint | None = None) -> KVectorField:
    """FL_*X_L as a k-vector field on (T¹ₖ)*Q, inverting FL at each evaluation."""

    def evaluate(ys: np.ndarray) -> np.ndarray:
        single = ys.ndim == 1
        cols = ys[:, None] if single else ys
        out = np.empty((m.k, m.ham_dim, cols.shape[1]))
        for j in range(cols.shape[1]):
            y = HamPoint.from_array(cols[:, j], m.k, m.n)
            out[..., j] = pushforward_XH(m, XL, y, guess)
        return out[..., 0] if single else out

    return KVectorField.from_function("hamiltonian", m.k, m.n, evaluate, label=f"FL*{XL.label}")


# ---------------------------------------------------------------------------
# Restricted equation for almost-regular models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RestrictedResidual:
    """Residual of the restricted HDW equation paired against the constraint tangent space."""

    residual: np.ndarray
    tangent_basis: np.ndarray
    constraint_rank: int
    rank_deficient: bool

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def constraint_values(constraints: Sequence[Expr], y: HamPoint) -> np.ndarray:
    coords = coordinates("hamiltonian", y.k, y.n)
    return _compiled_values(tuple(constraints), coords)(y.to_array())


def constraint_jacobian(constraints: Sequence[Expr], y: HamPoint) -> np.ndarray:
    coords = coordinates("hamiltonian", y.k, y.n)
    if not constraints:
        return np.zeros((0, len(coords)))
    rows = [_compiled_gradient(c, coords)(y.to_array()) for c in constraints]
    return np.stack(rows)


def restricted_ham_residual(
    m: FieldModel,
    constraints: Sequence[Expr | str],
    X0: KVectorField,
    y: HamPoint,
    hamiltonian: Expr | str | None = None,
    tol: float = DEFAULT_SUBMANIFOLD_TOL,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
) -> RestrictedResidual:
    """Tᵀ(Σ_A ι_{(X₀)_A}(ω₀)_A − dH₀) at ``y``, T an orthonormal tangent basis of the constraint set.

    Args:
        m: Field model; supplies H₀ unless ``hamiltonian`` is given.
        constraints: Expressions over (q, p) cutting out the constraint set.
        X0: Candidate k-vector field on (T¹ₖ)*Q.
        y: Point on the constraint set.
        hamiltonian: H₀, overriding ``m.hamiltonian``.
        tol: Largest |constraint| accepted at ``y``.
        pivot_tol: Relative cutoff for the tangent-space nullspace.

    Raises:
        ValidationError: No Hamiltonian is available.
        ConstraintViolationError: ``y`` is off the constraint set.
    """
    h0 = hamiltonian if hamiltonian is not None else m.hamiltonian
    if h0 is None:
        raise ValidationError(f"model {m.name!r} has no Hamiltonian; pass one explicitly")
    exprs = [as_expr(c) for c in constraints]
    allowed = set(coordinates("hamiltonian", m.k, m.n))
    for c in exprs:
        if c.free_variables - allowed:
            raise ValidationError("restricted constraints must be expressions in (q, p)")
    if exprs:
        values = constraint_values(exprs, y)
        worst = float(np.max(np.abs(values)))
        if worst > tol:
            raise ConstraintViolationError(f"point violates the constraints by {worst:.3e}")
    jacobian = constraint_jacobian(exprs, y)
    rank = numeric_rank(jacobian, DEFAULT_SUBMANIFOLD_TOL) if exprs else 0
    deficient = rank < len(exprs)
    if deficient:
        logger.warning("constraint Jacobian has rank %d < %d at %s", rank, len(exprs), y.to_array())
    tangent = null_space(jacobian, pivot_tol)
    covector = ham_geoeq_residual(h0, X0, y)
    return RestrictedResidual(tangent.T @ covector, tangent, rank, deficient)

