"""Field models, phase-space points and canonical coordinate naming.

Coordinates are ordered once and for all:

* configuration space Q: ``q1..qn``
* T¹ₖQ: ``q1..qn, v1_1, v1_2, ..., vn_k`` (field index first)
* (T¹ₖ)*Q: ``q1..qn, p1_1..p1_n, p2_1, ..., pk_n`` (parameter index first)
* the Whitney sum: the concatenation ``(q, v, p)``

Indices in the Python API are zero-based; names are one-based.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Literal

import numpy as np

from ._errors import DimensionMismatchError, ModelError
from ._expr import Expr, as_expr, compile_expr, compile_many, diff, simplify, to_string

Space = Literal["configuration", "lagrangian", "hamiltonian", "unified"]

SPACES: tuple[str, ...] = ("configuration", "lagrangian", "hamiltonian", "unified")


def q_name(i: int) -> str:
    return f"q{i + 1}"


def v_name(i: int, a: int) -> str:
    return f"v{i + 1}_{a + 1}"


def p_name(a: int, i: int) -> str:
    return f"p{a + 1}_{i + 1}"


@lru_cache(maxsize=None)
def coordinates(space: str, k: int, n: int) -> tuple[str, ...]:
    """Canonical coordinate names of ``space`` for ``k`` parameters and ``n`` fields."""
    qs = tuple(q_name(i) for i in range(n))
    vs = tuple(v_name(i, a) for i in range(n) for a in range(k))
    ps = tuple(p_name(a, i) for a in range(k) for i in range(n))
    if space == "configuration":
        return qs
    if space == "lagrangian":
        return qs + vs
    if space == "hamiltonian":
        return qs + ps
    if space == "unified":
        return qs + vs + ps
    raise ValueError(f"unknown space {space!r}")


def dimension(space: str, k: int, n: int) -> int:
    return len(coordinates(space, k, n))


def v_index(n: int, k: int, i: int, a: int) -> int:
    """Position of vⁱ_A in T¹ₖQ (and in the Whitney sum)."""
    return n + i * k + a


def p_index(n: int, k: int, a: int, i: int) -> int:
    """Position of pᴬ_i in (T¹ₖ)*Q."""
    return n + a * n + i


def unified_p_index(n: int, k: int, a: int, i: int) -> int:
    """Position of pᴬ_i in the Whitney sum."""
    return n + n * k + a * n + i


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------


def _vector(values: object, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{what} must be one-dimensional, got shape {arr.shape}")
    return arr.copy()


def _matrix(values: object, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{what} must be two-dimensional, got shape {arr.shape}")
    return arr.copy()


@dataclass(frozen=True, eq=False)
class LagPoint:
    """Point (qⁱ, vⁱ_A) of T¹ₖQ; ``v[i, A]`` is vⁱ_A."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "v", _matrix(self.v, "v"))
        if self.v.shape[0] != self.q.shape[0]:
            raise DimensionMismatchError(
                f"v has {self.v.shape[0]} field rows but q has {self.q.shape[0]} entries"
            )

    @property
    def n(self) -> int:
        return int(self.q.shape[0])

    @property
    def k(self) -> int:
        return int(self.v.shape[1])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.v.ravel()])

    @classmethod
    def from_array(cls, values: np.ndarray, k: int, n: int) -> LagPoint:
        values = np.asarray(values, dtype=float)
        if values.shape != (n + n * k,):
            raise DimensionMismatchError(
                f"expected {n + n * k} coordinates on T1kQ, got shape {values.shape}"
            )
        return cls(values[:n], values[n:].reshape(n, k))

    def bindings(self) -> dict[str, float]:
        return dict(zip(coordinates("lagrangian", self.k, self.n), self.to_array().tolist()))


@dataclass(frozen=True, eq=False)
class HamPoint:
    """Point (qⁱ, pᴬ_i) of (T¹ₖ)*Q; ``p[A, i]`` is pᴬ_i."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "p", _matrix(self.p, "p"))
        if self.p.shape[1] != self.q.shape[0]:
            raise DimensionMismatchError(
                f"p has {self.p.shape[1]} field columns but q has {self.q.shape[0]} entries"
            )

    @property
    def n(self) -> int:
        return int(self.q.shape[0])

    @property
    def k(self) -> int:
        return int(self.p.shape[0])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p.ravel()])

    @classmethod
    def from_array(cls, values: np.ndarray, k: int, n: int) -> HamPoint:
        values = np.asarray(values, dtype=float)
        if values.shape != (n + n * k,):
            raise DimensionMismatchError(
                f"expected {n + n * k} coordinates on (T1k)*Q, got shape {values.shape}"
            )
        return cls(values[:n], values[n:].reshape(k, n))

    def bindings(self) -> dict[str, float]:
        return dict(zip(coordinates("hamiltonian", self.k, self.n), self.to_array().tolist()))


@dataclass(frozen=True, eq=False)
class UnifiedPoint:
    """Point (qⁱ, vⁱ_A, pᴬ_i) of the Whitney sum."""

    q: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "v", _matrix(self.v, "v"))
        object.__setattr__(self, "p", _matrix(self.p, "p"))
        n = self.q.shape[0]
        if self.v.shape[0] != n or self.p.shape[1] != n or self.p.shape[0] != self.v.shape[1]:
            raise DimensionMismatchError(
                f"inconsistent shapes q{self.q.shape}, v{self.v.shape}, p{self.p.shape}"
            )

    @property
    def n(self) -> int:
        return int(self.q.shape[0])

    @property
    def k(self) -> int:
        return int(self.v.shape[1])

    @property
    def lagrangian(self) -> LagPoint:
        return LagPoint(self.q, self.v)

    @property
    def hamiltonian(self) -> HamPoint:
        return HamPoint(self.q, self.p)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.v.ravel(), self.p.ravel()])

    @classmethod
    def from_array(cls, values: np.ndarray, k: int, n: int) -> UnifiedPoint:
        values = np.asarray(values, dtype=float)
        if values.shape != (n + 2 * n * k,):
            raise DimensionMismatchError(
                f"expected {n + 2 * n * k} coordinates on the Whitney sum, got shape {values.shape}"
            )
        return cls(values[:n], values[n : n + n * k].reshape(n, k), values[n + n * k :].reshape(k, n))

    def bindings(self) -> dict[str, float]:
        return dict(zip(coordinates("unified", self.k, self.n), self.to_array().tolist()))


Point = LagPoint | HamPoint | UnifiedPoint


def point_array(x: Point | np.ndarray) -> np.ndarray:
    """Flat coordinate vector of a point or array."""
    if isinstance(x, (LagPoint, HamPoint, UnifiedPoint)):
        return x.to_array()
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Field model
# ---------------------------------------------------------------------------


def _require_subset(e: Expr, allowed: Sequence[str], what: str) -> None:
    stray = sorted(e.free_variables - set(allowed))
    if stray:
        raise ModelError(f"{what} uses variables outside its coordinates: {', '.join(stray)}")


@dataclass(frozen=True, eq=False)
class FieldModel:
    """First-order Lagrangian field theory L(qⁱ, vⁱ_A) with k parameters and n fields.

    Symbolic derivatives of L are computed once on first use and cached, along
    with numpy evaluators for them.

    Example:
        >>> m = FieldModel.from_text(2, 1, "0.5*(v1_1^2 + v1_2^2) - q1^2", name="harmonic")
        >>> m.lag_coords
        ('q1', 'v1_1', 'v1_2')
    """

    k: int
    n: int
    lagrangian: Expr
    name: str = "model"
    hamiltonian: Expr | None = None
    """Optional explicit Hamiltonian in (q, p); H₀ for almost-regular models."""

    constraints: tuple[Expr, ...] = field(default_factory=tuple)
    """Optional constraint expressions over the Whitney-sum coordinates."""

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ModelError(f"k must be a positive integer, got {self.k!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ModelError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lagrangian", as_expr(self.lagrangian))
        _require_subset(self.lagrangian, self.lag_coords, "lagrangian")
        if self.hamiltonian is not None:
            object.__setattr__(self, "hamiltonian", as_expr(self.hamiltonian))
            _require_subset(self.hamiltonian, self.ham_coords, "hamiltonian")
        constraints = tuple(as_expr(c) for c in self.constraints)
        for c in constraints:
            _require_subset(c, self.unified_coords, "constraint")
        object.__setattr__(self, "constraints", constraints)

    @classmethod
    def from_text(cls, k: int, n: int, lagrangian: str, **kwargs: object) -> FieldModel:
        return cls(k, n, as_expr(lagrangian), **kwargs)  # type: ignore[arg-type]

    # === Coordinates ===

    @property
    def config_coords(self) -> tuple[str, ...]:
        return coordinates("configuration", self.k, self.n)

    @property
    def lag_coords(self) -> tuple[str, ...]:
        return coordinates("lagrangian", self.k, self.n)

    @property
    def ham_coords(self) -> tuple[str, ...]:
        return coordinates("hamiltonian", self.k, self.n)

    @property
    def unified_coords(self) -> tuple[str, ...]:
        return coordinates("unified", self.k, self.n)

    @property
    def lag_dim(self) -> int:
        return self.n + self.n * self.k

    @property
    def ham_dim(self) -> int:
        return self.n + self.n * self.k

    @property
    def unified_dim(self) -> int:
        return self.n + 2 * self.n * self.k

    def check_point(self, x: Point) -> None:
        """Raise DimensionMismatchError unless ``x`` has this model's (k, n)."""
        if x.k != self.k or x.n != self.n:
            raise DimensionMismatchError(
                f"point has (k={x.k}, n={x.n}) but model {self.name!r} has (k={self.k}, n={self.n})"
            )

    # === Symbolic derivatives ===

    @cached_property
    def dL_dq(self) -> tuple[Expr, ...]:
        """∂L/∂qⁱ."""
        return tuple(diff(self.lagrangian, q_name(i)) for i in range(self.n))

    @cached_property
    def dL_dv(self) -> tuple[Expr, ...]:
        """∂L/∂vⁱ_A in T¹ₖQ velocity order (i, A)."""
        return tuple(
            diff(self.lagrangian, v_name(i, a)) for i in range(self.n) for a in range(self.k)
        )

    @cached_property
    def momenta(self) -> tuple[Expr, ...]:
        """∂L/∂vⁱ_A in momentum order (A, i): the p-components of the Legendre map."""
        k = self.k
        return tuple(self.dL_dv[i * k + a] for a in range(k) for i in range(self.n))

    @cached_property
    def d2L_dvdv(self) -> tuple[tuple[Expr, ...], ...]:
        """∂²L/∂vⁱ_A∂vʲ_B with rows and columns in (i, A) order."""
        vs = self.lag_coords[self.n :]
        rows: list[tuple[Expr, ...]] = []
        for r, first in enumerate(self.dL_dv):
            rows.append(tuple(diff(first, vs[c]) for c in range(len(vs))))
        # enforce exact symmetry of the stored matrix
        return tuple(
            tuple(rows[min(r, c)][max(r, c)] for c in range(len(vs))) for r in range(len(vs))
        )

    @cached_property
    def d2L_dqdv(self) -> tuple[tuple[Expr, ...], ...]:
        """∂²L/∂qʲ∂vⁱ_A indexed ``[j][(i, A)]``."""
        return tuple(
            tuple(diff(first, q_name(j)) for first in self.dL_dv) for j in range(self.n)
        )

    @cached_property
    def energy_expr(self) -> Expr:
        """E_L = Σ vⁱ_A ∂L/∂vⁱ_A − L."""
        vs = self.lag_coords[self.n :]
        total: Expr = as_expr(0)
        for name, first in zip(vs, self.dL_dv):
            total = total + as_expr(name) * first
        return simplify(total - self.lagrangian)

    @cached_property
    def legendre_jacobian_exprs(self) -> tuple[tuple[Expr, ...], ...]:
        """Jacobian of FL: rows over (T¹ₖ)*Q coordinates, columns over T¹ₖQ coordinates."""
        rows: list[tuple[Expr, ...]] = []
        for i in range(self.n):
            rows.append(tuple(as_expr(1.0 if c == i else 0.0) for c in range(self.lag_dim)))
        for p in self.momenta:
            rows.append(tuple(diff(p, name) for name in self.lag_coords))
        return tuple(rows)

    @cached_property
    def graph_substitution(self) -> dict[str, Expr]:
        """pᴬ_i ↦ ∂L/∂vⁱ_A, for re-expressing functions on the graph of FL."""
        return {
            p_name(a, i): self.momenta[a * self.n + i]
            for a in range(self.k)
            for i in range(self.n)
        }

    # === Compiled evaluators over T¹ₖQ arrays of shape (lag_dim,) or (lag_dim, B) ===

    @cached_property
    def _lagrangian_fn(self):
        return compile_expr(self.lagrangian, self.lag_coords)

    @cached_property
    def _dq_fn(self):
        return compile_many(self.dL_dq, self.lag_coords)

    @cached_property
    def _momenta_fn(self):
        return compile_many(self.momenta, self.lag_coords)

    @cached_property
    def _hessian_fn(self):
        return compile_many([e for row in self.d2L_dvdv for e in row], self.lag_coords)

    @cached_property
    def _mixed_fn(self):
        return compile_many([e for row in self.d2L_dqdv for e in row], self.lag_coords)

    @cached_property
    def _energy_fn(self):
        return compile_expr(self.energy_expr, self.lag_coords)

    @cached_property
    def _energy_grad_fn(self):
        return compile_many([diff(self.energy_expr, c) for c in self.lag_coords], self.lag_coords)

    @cached_property
    def _jacobian_fn(self):
        return compile_many(
            [e for row in self.legendre_jacobian_exprs for e in row], self.lag_coords
        )

    def eval_lagrangian(self, x: np.ndarray) -> np.ndarray:
        return self._lagrangian_fn(x)

    def eval_dq(self, x: np.ndarray) -> np.ndarray:
        """∂L/∂qⁱ, shape (n, ...)."""
        return self._dq_fn(x)

    def eval_momenta(self, x: np.ndarray) -> np.ndarray:
        """Momenta in (A, i) order, shape (k*n, ...)."""
        return self._momenta_fn(x)

    def eval_hessian(self, x: np.ndarray) -> np.ndarray:
        """Velocity Hessian, shape (nk, nk, ...)."""
        nk = self.n * self.k
        out = self._hessian_fn(x)
        return out.reshape((nk, nk, *out.shape[1:]))

    def eval_mixed(self, x: np.ndarray) -> np.ndarray:
        """∂²L/∂qʲ∂vⁱ_A, shape (n, nk, ...)."""
        out = self._mixed_fn(x)
        return out.reshape((self.n, self.n * self.k, *out.shape[1:]))

    def eval_energy(self, x: np.ndarray) -> np.ndarray:
        return self._energy_fn(x)

    def eval_energy_gradient(self, x: np.ndarray) -> np.ndarray:
        """dE_L in T¹ₖQ coordinates, shape (lag_dim, ...)."""
        return self._energy_grad_fn(x)

    def eval_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Jacobian of FL, shape (ham_dim, lag_dim, ...)."""
        out = self._jacobian_fn(x)
        return out.reshape((self.ham_dim, self.lag_dim, *out.shape[1:]))

    # === Identity ===

    def canonical_text(self) -> str:
        """Stable textual form used for hashing and report headers."""
        lines = [
            f"name={self.name}",
            f"k={self.k}",
            f"n={self.n}",
            f"lagrangian={to_string(self.lagrangian)}",
        ]
        if self.hamiltonian is not None:
            lines.append(f"hamiltonian={to_string(self.hamiltonian)}")
        lines.extend(f"constraint={to_string(c)}" for c in self.constraints)
        return "\n".join(lines) + "\n"

    @property
    def model_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()
