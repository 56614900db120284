"""ToolkitOptions dataclass for configuring the high-level pipelines."""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass
from typing import Any

from ._constants import (
    DEFAULT_BLOWUP_THRESHOLD,
    DEFAULT_BRACKET_STEP,
    DEFAULT_BRACKET_TOL,
    DEFAULT_FD_ORDER,
    DEFAULT_INTEGRATION_TOL,
    DEFAULT_MAX_LEVELS,
    DEFAULT_NEWTON_MAX_ITER,
    DEFAULT_NEWTON_TOL,
    DEFAULT_PIVOT_TOL,
    DEFAULT_REGULARITY_TOL,
    DEFAULT_REPORT_NODES,
    DEFAULT_RESIDUAL_TOL,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_SUBMANIFOLD_TOL,
    THREADS_ENV_VAR,
)
from ._errors import ValidationError


@dataclass
class ToolkitOptions:
    """Tolerances and execution settings shared by reports, the constraint
    algorithm and the command line.

    Example:
        >>> options = ToolkitOptions(residual_tol=1e-8, workers=4)
        >>> strict = options.with_updates(residual_tol=1e-11)
    """

    # === Tolerances ===

    regularity_tol: float = DEFAULT_REGULARITY_TOL
    """Lower bound on |det H| for a point to count as regular."""

    pivot_tol: float = DEFAULT_PIVOT_TOL
    """Relative cutoff for rank-revealing solves and nullspaces."""

    submanifold_tol: float = DEFAULT_SUBMANIFOLD_TOL
    """Singular-value cutoff for constraint-Jacobian ranks."""

    residual_tol: float = DEFAULT_RESIDUAL_TOL
    """Tolerance for pointwise algebraic residuals."""

    integration_tol: float = DEFAULT_INTEGRATION_TOL
    """Tolerance for residuals measured on integrated sections."""

    bracket_tol: float = DEFAULT_BRACKET_TOL
    """Bracket magnitude below which a k-vector field counts as integrable at a point."""

    bracket_step: float = DEFAULT_BRACKET_STEP
    """Finite-difference step for numeric brackets."""

    newton_tol: float = DEFAULT_NEWTON_TOL
    """Sup-norm target for Legendre inversion."""

    newton_max_iter: int = DEFAULT_NEWTON_MAX_ITER
    """Iteration cap for Legendre inversion."""

    # === Integration ===

    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD
    """Sup-norm at which an integration line is truncated."""

    fd_order: int = DEFAULT_FD_ORDER
    """Accuracy order of finite differences on sections (2 or 4)."""

    substeps: int = 1
    """Integrator steps per grid step."""

    # === Constraint algorithm and reports ===

    max_levels: int = DEFAULT_MAX_LEVELS
    """Maximum number of constraint-algorithm levels."""

    samples: int = DEFAULT_SAMPLES
    """Number of random sample points drawn for pointwise checks."""

    report_nodes: int = DEFAULT_REPORT_NODES
    """Grid nodes visited by pointwise stages of the equivalence report."""

    seed: int = DEFAULT_SEED
    """Seed for every random draw."""

    # === Execution ===

    workers: int | None = None
    """Worker threads for per-sample work. None reads KSYMP_THREADS, then falls back to 1."""

    verbose: bool = False
    """If True, log pipeline progress to stderr."""

    def __post_init__(self) -> None:
        if self.fd_order not in (2, 4):
            raise ValidationError(f"fd_order must be 2 or 4, got {self.fd_order}")
        if self.substeps < 1:
            raise ValidationError(f"substeps must be positive, got {self.substeps}")
        if self.samples < 1:
            raise ValidationError(f"samples must be positive, got {self.samples}")
        if self.workers is not None and self.workers < 1:
            raise ValidationError(f"workers must be positive, got {self.workers}")

    def resolved_workers(self) -> int:
        """Worker count after applying the environment fallback."""
        return resolve_workers(self.workers)

    def configure_logging(self) -> None:
        """Attach a stderr handler at DEBUG to the package logger when verbose."""
        if not self.verbose:
            return
        logger = logging.getLogger("ksymp")
        if not any(getattr(h, "_ksymp_verbose", False) for h in logger.handlers):
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter("[ksymp] %(name)s: %(message)s"))
            handler._ksymp_verbose = True  # type: ignore[attr-defined]
            logger.addHandler(handler)
        logger.setLevel(logging.DEBUG)

    def with_updates(self, **kwargs: Any) -> ToolkitOptions:
        """Create a new options instance with updated values.

        Args:
            **kwargs: Option values to update.

        Returns:
            A new ToolkitOptions instance with the updates applied.
        """
        from dataclasses import asdict

        current = asdict(self)
        current.update(kwargs)
        return ToolkitOptions(**current)


def resolve_workers(explicit: int | None) -> int:
    """Worker count: explicit value, then the KSYMP_THREADS variable, then 1."""
    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        warnings.warn(
            f"{THREADS_ENV_VAR}={raw!r} is not an integer; using 1 worker",
            UserWarning,
            stacklevel=3,
        )
        return 1
    return max(1, value)
