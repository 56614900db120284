"""Rank-revealing linear algebra shared by the field-equation solvers."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from ._constants import DEFAULT_PIVOT_TOL


@dataclass(frozen=True, eq=False)
class LstsqResult:
    """Minimum-norm least-squares solution of ``A x = b``."""

    solution: np.ndarray
    residual: float
    """Sup-norm of ``A x - b``."""

    rank: int


def min_norm_solve(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_PIVOT_TOL) -> LstsqResult:
    """Minimum-Euclidean-norm least-squares solution by complete orthogonal factorization.

    Args:
        a: Matrix of shape (m, r).
        b: Right-hand side of shape (m,).
        tol: Relative pivot cutoff below which columns count as dependent.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, r = a.shape
    if m == 0 or r == 0:
        solution = np.zeros(r)
        residual = float(np.max(np.abs(b))) if b.size else 0.0
        return LstsqResult(solution, residual, 0)
    solution, _, rank, _ = scipy.linalg.lstsq(a, b, cond=tol, lapack_driver="gelsy")
    residual = float(np.max(np.abs(a @ solution - b)))
    return LstsqResult(solution, residual, int(rank))


def batched_min_norm_solve(
    a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_PIVOT_TOL
) -> np.ndarray:
    """Minimum-norm solutions for a stack of systems ``a[j] x = b[j]``.

    Shapes are (B, m, r) and (B, m); returns (B, r).
    """
    pinv = np.linalg.pinv(np.asarray(a, dtype=float), rcond=tol)
    return np.einsum("bij,bj->bi", pinv, np.asarray(b, dtype=float))


def null_space(a: np.ndarray, tol: float = DEFAULT_PIVOT_TOL) -> np.ndarray:
    """Orthonormal basis of the kernel of ``a`` as columns."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0:
        return np.eye(a.shape[1])
    if a.shape[1] == 0:
        return np.zeros((0, 0))
    return scipy.linalg.null_space(a, rcond=tol)


def left_null_space(a: np.ndarray, tol: float = DEFAULT_PIVOT_TOL) -> np.ndarray:
    """Orthonormal basis of the kernel of ``a.T`` as columns."""
    return null_space(np.atleast_2d(np.asarray(a, dtype=float)).T, tol)


def numeric_rank(a: np.ndarray, tol: float) -> int:
    """Number of singular values above the absolute cutoff ``tol``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    return int(np.sum(np.linalg.svd(np.atleast_2d(a), compute_uv=False) > tol))


def rref(a: np.ndarray, tol: float = DEFAULT_PIVOT_TOL) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reduced row-echelon form with partial pivoting.

    Returns the nonzero rows of the echelon form and the pivot columns.
    """
    r = np.array(a, dtype=float)
    rows, cols = r.shape
    pivots: list[int] = []
    row = 0
    scale = max(1.0, float(np.max(np.abs(r)))) if r.size else 1.0
    for col in range(cols):
        if row >= rows:
            break
        best = row + int(np.argmax(np.abs(r[row:, col])))
        if abs(r[best, col]) <= tol * scale:
            r[row:, col] = 0.0
            continue
        r[[row, best]] = r[[best, row]]
        r[row] /= r[row, col]
        for other in range(rows):
            if other != row:
                r[other] -= r[other, col] * r[row]
        pivots.append(col)
        row += 1
    r[np.abs(r) <= tol * scale] = 0.0
    return r[:row], tuple(pivots)


def clean_coefficient(value: float, tol: float = 1e-12, max_denominator: int = 64) -> float:
    """Snap values within ``tol`` of a fraction with a small denominator to that fraction.

    Example:
        >>> clean_coefficient(0.49999999999999994)
        0.5
    """
    value = float(value)
    if not np.isfinite(value):
        return value
    nearest = Fraction(value).limit_denominator(max_denominator)
    return float(nearest) if abs(value - float(nearest)) <= tol else value
