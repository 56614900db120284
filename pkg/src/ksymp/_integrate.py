"""Integral sections of k-vector fields on rectangular parameter grids.

A section is stored node-wise: ``values`` has shape ``grid.shape + (dim,)``.
Optional derivative data follow the same layout with parameter axes inserted
before the coordinate axis: ``first[..., A, c]`` is ∂ψᶜ/∂t^A and
``second[..., A, B, c]`` is ∂²ψᶜ/∂t^A∂t^B.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from ._constants import DEFAULT_BLOWUP_THRESHOLD, DEFAULT_FD_ORDER, DEFAULT_RESIDUAL_TOL
from ._errors import (
    DimensionMismatchError,
    EvaluationError,
    MissingDerivativeError,
    NotSopdeError,
    ValidationError,
)
from ._expr import Expr, as_expr, compile_many, diff
from ._kvector import KVectorField, sopde_residual
from ._types import SPACES, FieldModel, LagPoint, Point, coordinates, point_array
from ._utils import format_float, write_json

logger = logging.getLogger(__name__)

_AXIS = re.compile(r"^\s*t(\d+)\s*=\s*([^:]+):([^:]+):([^:]+)\s*$")


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    """Uniform nodes ``start, start + step, ...`` not exceeding ``stop``."""

    start: float
    stop: float
    step: float

    def __post_init__(self) -> None:
        for name in ("start", "stop", "step"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"grid {name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.step <= 0:
            raise ValidationError(f"grid step must be positive, got {self.step}")
        if self.stop < self.start:
            raise ValidationError(f"grid stop {self.stop} lies before start {self.start}")

    @property
    def count(self) -> int:
        return int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def origin_index(self) -> int | None:
        """Index of the node at t = 0, or None if the axis misses it."""
        position = -self.start / self.step
        index = round(position)
        if 0 <= index < self.count and abs(position - index) <= 1e-9 * max(1.0, abs(position)):
            return int(index)
        return None


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid in ℝᵏ, one axis per parameter."""

    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ValidationError("a grid needs at least one axis")

    @classmethod
    def uniform(cls, k: int, start: float, stop: float, step: float) -> Grid:
        return cls(tuple(Axis(start, stop, step) for _ in range(k)))

    @classmethod
    def parse(cls, text: str, k: int | None = None) -> Grid:
        """Parse ``t1=0:1:0.01,t2=0:1:0.01``; axes may come in any order.

        Raises:
            ValidationError: Malformed text, a missing or repeated axis, or a
                non-positive step.
        """
        found: dict[int, Axis] = {}
        for part in text.split(","):
            match = _AXIS.match(part)
            if not match:
                raise ValidationError(f"cannot read grid axis {part.strip()!r}; expected tA=start:stop:step")
            a = int(match.group(1))
            if a < 1 or a in found:
                raise ValidationError(f"grid axis t{a} is out of range or repeated")
            try:
                start, stop, step = (float(match.group(g)) for g in (2, 3, 4))
            except ValueError as e:
                raise ValidationError(f"grid axis t{a} has a non-numeric bound") from e
            found[a] = Axis(start, stop, step)
        expected = k if k is not None else max(found)
        if sorted(found) != list(range(1, expected + 1)):
            raise ValidationError(f"grid must define exactly t1..t{expected}")
        return cls(tuple(found[a] for a in range(1, expected + 1)))

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(axis.count for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(axis.step for axis in self.axes)

    def origin(self) -> tuple[int, ...]:
        """Node index of t = 0.

        Raises:
            ValidationError: Some axis has no node at zero.
        """
        index = []
        for a, axis in enumerate(self.axes):
            i = axis.origin_index()
            if i is None:
                raise ValidationError(f"grid axis t{a + 1} does not contain the origin")
            index.append(i)
        return tuple(index)

    def mesh(self) -> np.ndarray:
        """Parameter values at every node, shape ``(k,) + shape``."""
        return np.stack(np.meshgrid(*(axis.nodes for axis in self.axes), indexing="ij"))

    def to_document(self) -> list[dict[str, Any]]:
        return [
            {"axis": f"t{a + 1}", "start": ax.start, "stop": ax.stop, "step": ax.step, "count": ax.count}
            for a, ax in enumerate(self.axes)
        ]


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def differentiate(values: np.ndarray, axis: int, step: float, order: int = DEFAULT_FD_ORDER) -> np.ndarray:
    """Derivative along ``axis`` of node values.

    Order 2 is ``numpy.gradient`` (central interior, second-order one-sided
    edges). Order 4 uses the five-point central stencil in the interior, the
    three-point central stencil next to the boundary and a second-order
    one-sided stencil on it.
    """
    if order not in (2, 4):
        raise ValidationError(f"finite-difference order must be 2 or 4, got {order}")
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    count = f.shape[0]
    if count == 1:
        return np.zeros_like(values, dtype=float)
    if order == 2 or count < 5:
        edge = 2 if count >= 3 else 1
        return np.gradient(values, step, axis=axis, edge_order=edge)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * step)
    out[1] = (f[2] - f[0]) / (2.0 * step)
    out[-2] = (f[-1] - f[-3]) / (2.0 * step)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * step)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * step)
    return np.moveaxis(out, 0, axis)


def _gradient(values: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    """Stack of derivatives along each grid axis, inserted before the last axis."""
    return np.stack(
        [differentiate(values, a, grid.axes[a].step, order) for a in range(grid.k)], axis=-2
    )


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Section:
    """Discrete map from a parameter grid into one phase space."""

    space: str
    k: int
    n: int
    grid: Grid
    values: np.ndarray
    first: np.ndarray | None = None
    second: np.ndarray | None = None
    derivative_source: str = "none"
    """Origin of the derivative data: analytic, finite-difference, velocities or none."""

    fd_margin: int = 0
    """Boundary layers per differentiation level where derivatives are one-sided."""

    truncated: bool = False
    diagnostics: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.space not in SPACES:
            raise ValidationError(f"sections live on {SPACES}, not {self.space!r}")
        if self.grid.k != self.k:
            raise DimensionMismatchError(f"grid has {self.grid.k} axes but the section has k={self.k}")
        shape = self.grid.shape + (self.dim,)
        if self.values.shape != shape:
            raise DimensionMismatchError(f"values of shape {self.values.shape}, expected {shape}")
        if self.first is not None and self.first.shape != self.grid.shape + (self.k, self.dim):
            raise DimensionMismatchError(f"first derivatives of shape {self.first.shape}")
        if self.second is not None and self.second.shape != self.grid.shape + (self.k, self.k, self.dim):
            raise DimensionMismatchError(f"second derivatives of shape {self.second.shape}")

    @property
    def coordinates(self) -> tuple[str, ...]:
        return coordinates(self.space, self.k, self.n)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def node(self, index: Sequence[int]) -> np.ndarray:
        return self.values[tuple(index)]

    def require_first(self) -> np.ndarray:
        if self.first is None:
            raise MissingDerivativeError(f"{self.space} section carries no first derivatives")
        return self.first

    def require_second(self) -> np.ndarray:
        if self.second is None:
            raise MissingDerivativeError(f"{self.space} section carries no second derivatives")
        return self.second

    def interior_mask(self, levels: int = 1) -> np.ndarray:
        """Nodes with finite values at least ``fd_margin * levels`` away from every edge."""
        mask = np.all(np.isfinite(self.values), axis=-1)
        margin = self.fd_margin * levels
        if margin:
            for a, count in enumerate(self.grid.shape):
                if count <= 2 * margin:
                    return np.zeros_like(mask)
                index = [slice(None)] * self.k
                index[a] = slice(margin, count - margin)
                edge = np.zeros_like(mask)
                edge[tuple(index)] = True
                mask &= edge
        return mask

    def with_finite_differences(self, order: int = DEFAULT_FD_ORDER) -> Section:
        """Copy with first and second derivatives recomputed from the values."""
        first = _gradient(self.values, self.grid, order)
        second = np.stack(
            [differentiate(first, a, self.grid.axes[a].step, order) for a in range(self.k)],
            axis=-3,
        )
        return replace(
            self, first=first, second=second, derivative_source="finite-difference", fd_margin=order // 2
        )

    def flat_nodes(self) -> np.ndarray:
        """Values as columns, shape (dim, nodes)."""
        return self.values.reshape(-1, self.dim).T


def max_over(residual: np.ndarray, mask: np.ndarray) -> float:
    """Sup-norm of ``residual`` on masked nodes; NaN at a masked node counts as infinite."""
    selected = residual[mask]
    if selected.size == 0:
        return 0.0
    if not np.all(np.isfinite(selected)):
        return math.inf
    return float(np.max(np.abs(selected)))


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def _evaluate_columns(X: KVectorField, a: int, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """X_a at each column; columns whose evaluation fails come back NaN and flagged."""
    try:
        return X.evaluate_many(ys)[a], np.zeros(ys.shape[1], dtype=bool)
    except EvaluationError:
        out = np.full(ys.shape, np.nan)
        failed = np.zeros(ys.shape[1], dtype=bool)
        for j in range(ys.shape[1]):
            try:
                out[:, j] = X.evaluate(ys[:, j])[a]
            except EvaluationError:
                failed[j] = True
        return out, failed


def _rk4_leg(
    X: KVectorField,
    a: int,
    starts: np.ndarray,
    h: float,
    steps: int,
    substeps: int,
    threshold: float,
    diagnostics: list[str],
) -> np.ndarray:
    """Advance every column of ``starts`` (dim, B) through ``steps`` grid steps of X_a.

    Returns the states after each step, shape (steps, dim, B); dead lines stay NaN.
    """
    dim, width = starts.shape
    out = np.full((steps, dim, width), np.nan)
    y = starts.copy()
    alive = np.all(np.isfinite(y), axis=0)
    dt = h / substeps
    for s in range(steps):
        for _ in range(substeps):
            if not alive.any():
                break
            ya = y[:, alive]
            k1, bad1 = _evaluate_columns(X, a, ya)
            k2, bad2 = _evaluate_columns(X, a, ya + 0.5 * dt * k1)
            k3, bad3 = _evaluate_columns(X, a, ya + 0.5 * dt * k2)
            k4, bad4 = _evaluate_columns(X, a, ya + dt * k3)
            nxt = ya + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            failed = bad1 | bad2 | bad3 | bad4
            with np.errstate(invalid="ignore"):
                blown = ~np.all(np.isfinite(nxt), axis=0) | (np.max(np.abs(nxt), axis=0) > threshold)
            dead = failed | blown
            if dead.any():
                reason = "evaluation failed" if failed.any() else "state exceeded the blow-up threshold"
                message = f"t{a + 1} leg: {int(dead.sum())} line(s) stopped after {s} step(s), {reason}"
                diagnostics.append(message)
                logger.warning(message)
                nxt[:, dead] = np.nan
            y[:, alive] = nxt
            alive[np.flatnonzero(alive)[dead]] = False
        out[s] = np.where(alive, y, np.nan)
    return out


def integrate_field(
    X: KVectorField,
    x0: Point | np.ndarray,
    grid: Grid,
    *,
    order: Sequence[int] | None = None,
    substeps: int = 1,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> Section:
    """Integral section of ``X`` through ``x0`` by composed one-parameter legs.

    Axis t^{order[0]} is swept first with the flow of its field from the
    origin, then every node reached so far seeds a sweep along the next axis,
    and so on. The classical fourth-order Runge-Kutta step is used, with
    ``substeps`` steps per grid step.

    Args:
        X: Field on any phase space.
        x0: Initial point at t = 0.
        grid: Parameter grid containing the origin.
        order: Sweep order of the axes; ascending by default.
        substeps: Integrator steps per grid step.
        blowup_threshold: Lines whose sup-norm exceeds this are stopped.

    Raises:
        ValidationError: The grid misses the origin or ``order`` is not a
            permutation of the axes.
        DimensionMismatchError: Grid, field and point disagree on dimensions.
    """
    if grid.k != X.k:
        raise DimensionMismatchError(f"grid has {grid.k} axes but the field has k={X.k}")
    start = point_array(x0)
    if start.shape != (X.dim,):
        raise DimensionMismatchError(f"initial point has shape {start.shape}, expected ({X.dim},)")
    if substeps < 1:
        raise ValidationError(f"substeps must be positive, got {substeps}")
    sweep = tuple(range(X.k)) if order is None else tuple(order)
    if sorted(sweep) != list(range(X.k)):
        raise ValidationError(f"sweep order {sweep} is not a permutation of the axes")
    origin = grid.origin()

    values = np.full(grid.shape + (X.dim,), np.nan)
    values[origin] = start
    diagnostics: list[str] = []
    swept: list[int] = []
    for a in sweep:
        index: list[Any] = [slice(None) if b in swept else origin[b] for b in range(X.k)]
        seeds = values[tuple(index)]
        columns = seeds.reshape(-1, X.dim).T
        axis = grid.axes[a]
        forward = axis.count - 1 - origin[a]
        backward = origin[a]
        logger.debug("sweeping t%d over %d line(s)", a + 1, columns.shape[1])
        for direction, steps in ((1, forward), (-1, backward)):
            if steps == 0:
                continue
            states = _rk4_leg(
                X, a, columns, direction * axis.step, steps, substeps, blowup_threshold, diagnostics
            )
            for s in range(steps):
                index[a] = origin[a] + direction * (s + 1)
                values[tuple(index)] = states[s].T.reshape(seeds.shape)
        swept.append(a)

    return Section(
        X.space,
        X.k,
        X.n,
        grid,
        values,
        truncated=bool(diagnostics),
        diagnostics=tuple(diagnostics),
    )


def integrate_section(
    X: KVectorField,
    x0: LagPoint,
    grid: Grid,
    *,
    tol: float = DEFAULT_RESIDUAL_TOL,
    **kwargs: Any,
) -> Section:
    """Integral section on T¹ₖQ of a SOPDE.

    Raises:
        NotSopdeError: ``X`` fails the second-order condition at ``x0``.
    """
    if X.space != "lagrangian":
        raise NotSopdeError("integrate_section expects a field on T1kQ")
    gap = sopde_residual(X, [x0])
    if gap > tol:
        raise NotSopdeError(f"field is not second order at the initial point (residual {gap:.3e})")
    return integrate_field(X, x0, grid, **kwargs)


def path_independence(X: KVectorField, x0: Point | np.ndarray, grid: Grid, **kwargs: Any) -> float:
    """Largest node-wise distance between ascending and descending sweeps."""
    if X.k == 1:
        return 0.0
    up = integrate_field(X, x0, grid, **kwargs)
    down = integrate_field(X, x0, grid, order=tuple(reversed(range(X.k))), **kwargs)
    both = np.all(np.isfinite(up.values), axis=-1) & np.all(np.isfinite(down.values), axis=-1)
    if not both.any():
        return math.inf
    return float(np.max(np.abs(up.values[both] - down.values[both])))


# ---------------------------------------------------------------------------
# Derived sections
# ---------------------------------------------------------------------------


def prolong(phi: Section) -> Section:
    """First prolongation φ⁽¹⁾ with vⁱ_A := ∂φⁱ/∂t^A.

    Raises:
        MissingDerivativeError: ``phi`` carries no first derivatives.
    """
    if phi.space != "configuration":
        raise ValidationError("only sections over Q can be prolonged")
    first = phi.require_first()
    shape = phi.grid.shape
    velocities = np.swapaxes(first, -1, -2).reshape(shape + (phi.n * phi.k,))
    values = np.concatenate([phi.values, velocities], axis=-1)
    lifted_first = None
    if phi.second is not None:
        dv = np.swapaxes(phi.second, -1, -2).reshape(shape + (phi.k, phi.n * phi.k))
        lifted_first = np.concatenate([first, dv], axis=-1)
    return Section(
        "lagrangian",
        phi.k,
        phi.n,
        phi.grid,
        values,
        first=lifted_first,
        derivative_source=phi.derivative_source,
        fd_margin=phi.fd_margin,
        truncated=phi.truncated,
        diagnostics=phi.diagnostics,
    )


def project_configuration(psi: Section) -> Section:
    """Base section φ = τ∘ψ of a section on T¹ₖQ, differentiated through its velocities.

    The first derivatives are read off the velocity coordinates and the second
    ones are the parameter derivatives of those velocities, so ``psi`` needs
    first-derivative data.
    """
    if psi.space != "lagrangian":
        raise ValidationError("project_configuration expects a section on T1kQ")
    first = psi.require_first()
    shape = psi.grid.shape
    n, k = psi.n, psi.k
    v = psi.values[..., n:].reshape(shape + (n, k))
    dv = first[..., n:].reshape(shape + (k, n, k))
    return Section(
        "configuration",
        k,
        n,
        psi.grid,
        psi.values[..., :n].copy(),
        first=np.swapaxes(v, -1, -2).copy(),
        second=np.swapaxes(dv, -1, -2).copy(),
        derivative_source="velocities",
        fd_margin=psi.fd_margin,
        truncated=psi.truncated,
        diagnostics=psi.diagnostics,
    )


def holonomy_check(psi: Section) -> float:
    """max |vⁱ_A(ψ) − ∂(qⁱ∘ψ)/∂t^A| over interior nodes."""
    if psi.space not in ("lagrangian", "unified"):
        raise ValidationError("holonomy is defined for sections carrying velocities")
    first = psi.require_first()
    n, k = psi.n, psi.k
    v = psi.values[..., n : n + n * k].reshape(psi.grid.shape + (n, k))
    gap = np.swapaxes(v, -1, -2) - first[..., :n]
    mask = psi.interior_mask(1)
    return max_over(gap, mask)


def pushforward_section(m: FieldModel, psi: Section, order: int = DEFAULT_FD_ORDER) -> Section:
    """FL∘ψ node by node, with derivatives recomputed by finite differences."""
    if psi.space != "lagrangian":
        raise ValidationError("pushforward_section expects a section on T1kQ")
    nodes = psi.flat_nodes()
    finite = np.all(np.isfinite(nodes), axis=0)
    image = np.full((m.ham_dim, nodes.shape[1]), np.nan)
    if finite.any():
        image[:, finite] = np.concatenate(
            [nodes[: m.n, finite], m.eval_momenta(nodes[:, finite])], axis=0
        )
    values = image.T.reshape(psi.grid.shape + (m.ham_dim,))
    section = Section(
        "hamiltonian",
        psi.k,
        psi.n,
        psi.grid,
        values,
        truncated=psi.truncated,
        diagnostics=psi.diagnostics,
    )
    return section.with_finite_differences(order)


def field_on_section(X: KVectorField, psi: Section) -> np.ndarray:
    """X_A(ψ(t)) at every node, shape ``grid.shape + (k, dim)``; NaN where ψ is undefined."""
    if X.space != psi.space or X.k != psi.k or X.n != psi.n:
        raise DimensionMismatchError(f"field on {X.space} cannot be evaluated on a {psi.space} section")
    nodes = psi.flat_nodes()
    finite = np.all(np.isfinite(nodes), axis=0)
    out = np.full((X.k, X.dim, nodes.shape[1]), np.nan)
    if finite.any():
        out[..., finite] = X.evaluate_many(nodes[:, finite])
    return np.moveaxis(out, -1, 0).reshape(psi.grid.shape + (X.k, X.dim))


def integral_section_residual(X: KVectorField, psi: Section) -> np.ndarray:
    """∂ψ/∂t^A − X_A(ψ) at every node, shape ``grid.shape + (k, dim)``."""
    return psi.require_first() - field_on_section(X, psi)


# ---------------------------------------------------------------------------
# Analytic sections
# ---------------------------------------------------------------------------

SectionFunction = Callable[[np.ndarray], np.ndarray]


def section_from_functions(
    space: str,
    k: int,
    n: int,
    grid: Grid,
    values: SectionFunction,
    first: SectionFunction | None = None,
    second: SectionFunction | None = None,
) -> Section:
    """Section with exact derivative data.

    Each callable receives the parameter mesh of shape ``(k,) + grid.shape``.
    ``values`` returns ``(dim,) + grid.shape``, ``first`` returns
    ``(k, dim) + grid.shape`` and ``second`` returns ``(k, k, dim) + grid.shape``.
    """
    mesh = grid.mesh()
    ndim = grid.k
    vals = np.moveaxis(np.asarray(values(mesh), dtype=float), 0, -1)
    d1 = None if first is None else np.moveaxis(np.asarray(first(mesh), dtype=float), (0, 1), (ndim, ndim + 1))
    d2 = (
        None
        if second is None
        else np.moveaxis(np.asarray(second(mesh), dtype=float), (0, 1, 2), (ndim, ndim + 1, ndim + 2))
    )
    return Section(
        space,
        k,
        n,
        grid,
        vals,
        first=d1,
        second=d2,
        derivative_source="analytic" if first is not None else "none",
    )


def parameter_names(k: int) -> tuple[str, ...]:
    return tuple(f"t{a + 1}" for a in range(k))


def reference_section(k: int, n: int, grid: Grid, exprs: Sequence[Expr | str]) -> Section:
    """Configuration section φⁱ(t) given by expressions in t1..tk, differentiated exactly."""
    if len(exprs) != n:
        raise DimensionMismatchError(f"expected {n} expressions, got {len(exprs)}")
    params = parameter_names(k)
    phis = [as_expr(e) for e in exprs]
    for e in phis:
        stray = e.free_variables - set(params)
        if stray:
            raise ValidationError(f"reference solution uses {', '.join(sorted(stray))}; only {params} are allowed")
    d1 = [[diff(phi, params[a]) for phi in phis] for a in range(k)]
    d2 = [[[diff(d1[a][i], params[b]) for i in range(n)] for b in range(k)] for a in range(k)]
    value_fn = compile_many(phis, params)
    first_fn = compile_many([e for row in d1 for e in row], params)
    second_fn = compile_many([e for block in d2 for row in block for e in row], params)
    return section_from_functions(
        "configuration",
        k,
        n,
        grid,
        value_fn,
        lambda t: first_fn(t).reshape((k, n, *t.shape[1:])),
        lambda t: second_fn(t).reshape((k, k, n, *t.shape[1:])),
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_section_csv(section: Section, path: str | Path) -> Path:
    """One row per node in C order: t1..tk, then state coordinates in canonical order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh = section.grid.mesh().reshape(section.k, -1)
    nodes = section.values.reshape(-1, section.dim)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([*parameter_names(section.k), *section.coordinates])
        for j in range(nodes.shape[0]):
            writer.writerow([format_float(t) for t in mesh[:, j]] + [format_float(x) for x in nodes[j]])
    return path


def section_document(section: Section, metadata: dict[str, Any] | None = None) -> dict[str, Any]:
    """JSON-ready description of a section: grid, column order, flags and node values."""
    return {
        "space": section.space,
        "k": section.k,
        "n": section.n,
        "grid": section.grid.to_document(),
        "columns": [*parameter_names(section.k), *section.coordinates],
        "derivative_source": section.derivative_source,
        "truncated": section.truncated,
        "diagnostics": list(section.diagnostics),
        "metadata": metadata or {},
        "values": section.values.reshape(-1, section.dim),
    }


def write_section_json(section: Section, path: str | Path, metadata: dict[str, Any] | None = None) -> Path:
    return write_json(section_document(section, metadata), path)
