"""k-vector fields, the second-order condition and pointwise contraction machinery."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from ._constants import DEFAULT_BRACKET_STEP
from ._errors import DimensionMismatchError, ModelError, ValidationError
from ._expr import Expr, ExprLike, Var, as_expr, compile_many, diff, simplify, to_string
from ._types import Point, coordinates, point_array, v_index, v_name

if TYPE_CHECKING:
    from ._geometry import TwoFormFamily

logger = logging.getLogger(__name__)

FieldFunction = Callable[[np.ndarray], np.ndarray]

FIELD_SPACES = ("lagrangian", "hamiltonian", "unified")


class KVectorField:
    """A k-tuple (X_1, ..., X_k) of vector fields on one phase space.

    Components are either expressions in the space's coordinates or a function
    mapping coordinate arrays of shape ``(dim,)`` / ``(dim, B)`` to arrays of
    shape ``(k, dim)`` / ``(k, dim, B)``. Both kinds evaluate through the same
    interface.

    Example:
        >>> X = KVectorField.from_exprs("lagrangian", 1, 1, [["v1_1", "-q1"]])
        >>> X.evaluate(np.array([1.0, 0.0])).tolist()
        [[0.0, -1.0]]
    """

    def __init__(
        self,
        space: str,
        k: int,
        n: int,
        components: Sequence[Sequence[ExprLike]] | None = None,
        function: FieldFunction | None = None,
        label: str = "",
    ) -> None:
        if space not in FIELD_SPACES:
            raise ValidationError(f"k-vector fields live on {FIELD_SPACES}, not {space!r}")
        if (components is None) == (function is None):
            raise ValidationError("give exactly one of components or function")
        self.space = space
        self.k = k
        self.n = n
        self.label = label
        self._function = function
        self._components: tuple[tuple[Expr, ...], ...] | None = None
        if components is not None:
            rows = tuple(tuple(as_expr(c) for c in row) for row in components)
            if len(rows) != k or any(len(row) != self.dim for row in rows):
                raise DimensionMismatchError(
                    f"expected {k} rows of {self.dim} components on the {space} space"
                )
            allowed = set(self.coordinates)
            for row in rows:
                for c in row:
                    stray = c.free_variables - allowed
                    if stray:
                        raise ModelError(
                            f"component uses variables outside {space} coordinates: "
                            + ", ".join(sorted(stray))
                        )
            self._components = rows

    @classmethod
    def from_exprs(
        cls,
        space: str,
        k: int,
        n: int,
        components: Sequence[Sequence[ExprLike]],
        label: str = "",
    ) -> KVectorField:
        return cls(space, k, n, components=components, label=label)

    @classmethod
    def from_function(
        cls, space: str, k: int, n: int, function: FieldFunction, label: str = ""
    ) -> KVectorField:
        return cls(space, k, n, function=function, label=label)

    @property
    def coordinates(self) -> tuple[str, ...]:
        return coordinates(self.space, self.k, self.n)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def is_symbolic(self) -> bool:
        return self._components is not None

    @property
    def components(self) -> tuple[tuple[Expr, ...], ...]:
        if self._components is None:
            raise ValidationError(f"field {self.label or '<anonymous>'} is not symbolic")
        return self._components

    def component(self, a: int) -> tuple[Expr, ...]:
        return self.components[a]

    @cached_property
    def _compiled(self) -> FieldFunction:
        flat = compile_many([c for row in self.components for c in row], self.coordinates)
        k, dim = self.k, self.dim

        def evaluate(x: np.ndarray) -> np.ndarray:
            out = flat(x)
            return out.reshape((k, dim, *out.shape[1:]))

        return evaluate

    def evaluate(self, x: Point | np.ndarray) -> np.ndarray:
        """Coefficients at a single point, shape (k, dim)."""
        arr = point_array(x)
        if arr.shape != (self.dim,):
            raise DimensionMismatchError(
                f"point of shape {arr.shape} does not live on the {self.space} space of dim {self.dim}"
            )
        fn = self._compiled if self._function is None else self._function
        return np.asarray(fn(arr), dtype=float).reshape(self.k, self.dim)

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        """Coefficients at a batch of points given as columns, shape (k, dim, B)."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"batch of shape {xs.shape} does not live on the {self.space} space of dim {self.dim}"
            )
        fn = self._compiled if self._function is None else self._function
        return np.asarray(fn(xs), dtype=float).reshape(self.k, self.dim, xs.shape[1])

    def directional_derivative(self, a: int, f: Expr) -> Expr:
        """X_a(f) = Σ (X_a)ᶜ ∂f/∂xᶜ as an expression."""
        total: Expr = as_expr(0)
        for name, coefficient in zip(self.coordinates, self.component(a)):
            total = total + coefficient * diff(f, name)
        return simplify(total)

    def describe(self) -> list[str]:
        """One line per nonzero component, for printing."""
        lines = []
        for a, row in enumerate(self.components):
            for name, c in zip(self.coordinates, row):
                text = to_string(c)
                if text != "0":
                    lines.append(f"X{a + 1}[{name}] = {text}")
        return lines


def stack_points(samples: Sequence[Point | np.ndarray] | np.ndarray, dim: int) -> np.ndarray:
    """Sample points as columns of a (dim, B) array."""
    if isinstance(samples, np.ndarray) and samples.ndim == 2:
        arr = samples
    else:
        arr = np.array([point_array(s) for s in samples], dtype=float).reshape(-1, dim)
    if arr.shape[1] != dim:
        raise DimensionMismatchError(f"samples have {arr.shape[1]} coordinates, expected {dim}")
    return arr.T.copy()


# ---------------------------------------------------------------------------
# Second-order condition
# ---------------------------------------------------------------------------


def sopde_residual(X: KVectorField, samples: Sequence[Point | np.ndarray] | np.ndarray) -> float:
    """max |(X_A)ⁱ − vⁱ_A| over ``samples``."""
    if X.space != "lagrangian":
        raise ValidationError("the second-order condition applies to fields on T1kQ")
    xs = stack_points(samples, X.dim)
    if xs.shape[1] == 0:
        return 0.0
    values = X.evaluate_many(xs)
    worst = 0.0
    for a in range(X.k):
        for i in range(X.n):
            gap = values[a, i] - xs[v_index(X.n, X.k, i, a)]
            worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def is_sopde(
    X: KVectorField, samples: Sequence[Point | np.ndarray] | np.ndarray, tol: float
) -> bool:
    """True iff (X_A)ⁱ = vⁱ_A within ``tol`` at every sample."""
    return sopde_residual(X, samples) <= tol


def liouville_fields(k: int, n: int) -> KVectorField:
    """C_A = vⁱ_A ∂/∂vⁱ_A on T¹ₖQ."""
    dim = n + n * k
    rows: list[list[Expr]] = []
    for a in range(k):
        row: list[Expr] = [as_expr(0)] * dim
        for i in range(n):
            row[v_index(n, k, i, a)] = Var(v_name(i, a))
        rows.append(row)
    return KVectorField.from_exprs("lagrangian", k, n, rows, label="liouville")


def tangent_structures(k: int, n: int) -> np.ndarray:
    """Constant matrices of the k-tangent structure, shape (k, dim, dim).

    S^A sends ∂/∂qⁱ to ∂/∂vⁱ_A and kills the vertical directions.
    """
    dim = n + n * k
    s = np.zeros((k, dim, dim))
    for a in range(k):
        for i in range(n):
            s[a, v_index(n, k, i, a), i] = 1.0
    return s


def tangent_structure_residual(
    X: KVectorField, samples: Sequence[Point | np.ndarray] | np.ndarray
) -> float:
    """max |S^A(X_A) − C_A|; vanishes exactly when X is second order."""
    xs = stack_points(samples, X.dim)
    s = tangent_structures(X.k, X.n)
    values = X.evaluate_many(xs)
    liouville = liouville_fields(X.k, X.n).evaluate_many(xs)
    worst = 0.0
    for a in range(X.k):
        gap = s[a] @ values[a] - liouville[a]
        worst = max(worst, float(np.max(np.abs(gap))) if gap.size else 0.0)
    return worst


# ---------------------------------------------------------------------------
# Contraction
# ---------------------------------------------------------------------------


def contraction_matrix(omega: TwoFormFamily, x: Point | np.ndarray) -> np.ndarray:
    """Matrix of (X_1..X_k) ↦ Σ_A ι_{X_A} ω_A at ``x``.

    Columns are indexed by the flattened coefficients ``A*dim + i``; the image
    has entries Σ_A Σ_i (X_A)ⁱ (ω_A)_ij.
    """
    w = omega.evaluate(x)
    k, dim, _ = w.shape
    return np.concatenate([w[a].T for a in range(k)], axis=1) if k else np.zeros((dim, 0))


def contract(omega: TwoFormFamily, X: KVectorField, x: Point | np.ndarray) -> np.ndarray:
    """Σ_A ι_{X_A} ω_A at ``x`` as a covector, entry_j = Σ_A Σ_i (X_A)ⁱ (ω_A)_ij.

    Raises:
        DimensionMismatchError: ``omega`` and ``X`` live on different spaces.
    """
    if tuple(omega.coordinates) != tuple(X.coordinates) or omega.k != X.k:
        raise DimensionMismatchError(
            f"cannot contract a field on {X.space} with forms over {omega.space}"
        )
    w = omega.evaluate(x)
    values = X.evaluate(x)
    return np.einsum("ai,aij->j", values, w)


# ---------------------------------------------------------------------------
# Brackets
# ---------------------------------------------------------------------------


def bracket_numeric(
    X: KVectorField,
    a: int,
    b: int,
    x: Point | np.ndarray,
    h: float = DEFAULT_BRACKET_STEP,
) -> np.ndarray:
    """Finite-difference Lie bracket [X_a, X_b](x).

    Each directional derivative is a central difference with step ``h`` along
    the other field's value at ``x``; the error is O(h²).
    """
    if a == b:
        raise ValidationError("a bracket needs two distinct parameter indices")
    x0 = point_array(x)
    values = X.evaluate(x0)
    xa, xb = values[a], values[b]
    probes = np.stack([x0 + h * xa, x0 - h * xa, x0 + h * xb, x0 - h * xb], axis=1)
    around = X.evaluate_many(probes)
    along_a = (around[b, :, 0] - around[b, :, 1]) / (2 * h)
    along_b = (around[a, :, 2] - around[a, :, 3]) / (2 * h)
    return along_a - along_b


def max_bracket(X: KVectorField, x: Point | np.ndarray, h: float = DEFAULT_BRACKET_STEP) -> float:
    """Largest sup-norm of [X_a, X_b](x) over all pairs; zero for k = 1."""
    worst = 0.0
    for a in range(X.k):
        for b in range(a + 1, X.k):
            worst = max(worst, float(np.max(np.abs(bracket_numeric(X, a, b, x, h)))))
    logger.debug("max bracket of %s at %s: %.3e", X.label or "field", point_array(x), worst)
    return worst


def zero_field(space: str, k: int, n: int) -> KVectorField:
    dim = len(coordinates(space, k, n))
    return KVectorField.from_exprs(space, k, n, [[0] * dim for _ in range(k)], label="zero")
