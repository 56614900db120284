"""Command-line front end.

Usage::

    ksymp derive models/harmonic.toml
    ksymp check models/product.toml --samples 50 --seed 3
    ksymp integrate models/harmonic.toml --v 1,1 --grid t1=0:1:0.01,t2=0:1:0.01 --out out
    ksymp verify models/harmonic.toml
    ksymp constraints models/half_v11_squared.toml

Exit codes: 0 when every check passes, 1 on a residual failure, 2 on usage,
parse or validation errors.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from ._errors import KSympError, ModelError, ValidationError
from ._expr import Const, Expr, is_zero, simplify, to_string
from ._geometry import is_regular, lagrangian_one_forms, lagrangian_two_forms, pullback_check
from ._integrate import (
    Grid,
    integrate_section,
    max_over,
    project_configuration,
    reference_section,
    write_section_csv,
    write_section_json,
)
from ._koperator import default_k, verify_k
from ._lagside import sopde_field
from ._modelfile import ModelDocument, load_model
from ._options import ToolkitOptions
from ._types import FieldModel, LagPoint, p_name, v_name
from ._unified import constraint_algorithm, graph_point
from ._utils import dumps, random_lag_points, write_json
from ._verify import choose_ansatz, equivalence_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_ATOM = re.compile(r"[A-Za-z0-9_.]+")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _signed_tail(text: str) -> str:
    return f" - {text[1:]}" if text.startswith("-") else f" + {text}"


def render_euler_lagrange(m: FieldModel) -> list[str]:
    """One line per component: Σ_A d/dt^A(∂L/∂vⁱ_A) − ∂L/∂qⁱ = 0."""
    lines = []
    for i in range(m.n):
        terms = [
            f"d/dt{a + 1}({to_string(m.dL_dv[i * m.k + a])})"
            for a in range(m.k)
            if not is_zero(m.dL_dv[i * m.k + a])
        ]
        rest = simplify(-m.dL_dq[i])
        text = " + ".join(terms)
        if not is_zero(rest):
            rendered = to_string(rest)
            text = text + _signed_tail(rendered) if text else rendered
        lines.append(f"EL[{i + 1}]: {text or '0'} = 0")
    return lines


def _term(coefficient: Expr, basis: str) -> str:
    text = to_string(coefficient)
    if text == "1":
        return basis
    if text == "-1":
        return f"-{basis}"
    if _ATOM.fullmatch(text) or (isinstance(coefficient, Const) and text.startswith("-")):
        return f"{text}*{basis}"
    return f"({text})*{basis}"


def _join(terms: list[str]) -> str:
    if not terms:
        return "0"
    return terms[0] + "".join(_signed_tail(t) for t in terms[1:])


def render_derivation(m: FieldModel) -> list[str]:
    """Deterministic text for the ``derive`` command, in canonical coordinate order."""
    lines = [f"model: {m.name} (k={m.k}, n={m.n})", f"L = {to_string(m.lagrangian)}"]
    lines.extend(render_euler_lagrange(m))
    for a in range(m.k):
        for i in range(m.n):
            lines.append(f"FL: {p_name(a, i)} = {to_string(m.momenta[a * m.n + i])}")
    lines.append(f"E_L = {to_string(m.energy_expr)}")
    velocities = [v_name(i, a) for i in range(m.n) for a in range(m.k)]
    for r, row in enumerate(m.d2L_dvdv):
        for c, entry in enumerate(row):
            lines.append(f"Hess[{velocities[r]}, {velocities[c]}] = {to_string(entry)}")
    coords = m.lag_coords
    for a, form in enumerate(lagrangian_one_forms(m)):
        terms = [_term(e, f"d{coords[j]}") for j, e in enumerate(form) if not is_zero(e)]
        lines.append(f"theta_L[{a + 1}] = {_join(terms)}")
    for a, matrix in enumerate(lagrangian_two_forms(m).matrices):
        terms = [
            _term(matrix[r][c], f"d{coords[r]}^d{coords[c]}")
            for r in range(len(coords))
            for c in range(r + 1, len(coords))
            if not is_zero(matrix[r][c])
        ]
        lines.append(f"omega_L[{a + 1}] = {_join(terms)}")
    return lines


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ValidationError(f"{what} must be comma-separated numbers, got {text!r}") from exc


def initial_point(doc: ModelDocument, q: str | None, v: str | None) -> LagPoint:
    """Point from ``--q``/``--v``, else the first named sample, else the origin.

    ``--v`` lists one row of k velocities per component, rows separated by ``;``.
    """
    m = doc.model
    if q is None and v is None and doc.samples:
        return next(iter(doc.samples.values()))
    qs = _floats(q, "--q") if q is not None else [0.0] * m.n
    if v is not None:
        vs = [_floats(row, "--v") for row in v.split(";")]
    else:
        vs = [[0.0] * m.k for _ in range(m.n)]
    if len(qs) != m.n or len(vs) != m.n or any(len(row) != m.k for row in vs):
        raise ValidationError(f"initial point must have n={m.n} positions and {m.n}x{m.k} velocities")
    return LagPoint(qs, vs)


def _grid(doc: ModelDocument, text: str | None) -> Grid:
    if text is None:
        return Grid.uniform(doc.model.k, 0.0, 1.0, 0.01)
    return Grid.parse(text, doc.model.k)


def _samples(doc: ModelDocument, options: ToolkitOptions) -> list[LagPoint]:
    if doc.samples:
        return list(doc.samples.values())
    return random_lag_points(doc.model, options.samples, options.seed)


def _options(args: argparse.Namespace) -> ToolkitOptions:
    updates: dict[str, Any] = {
        "samples": args.samples,
        "seed": args.seed,
        "workers": args.workers,
        "verbose": args.verbose,
    }
    if args.tol is not None:
        updates["residual_tol"] = args.tol
    if getattr(args, "max_levels", None) is not None:
        updates["max_levels"] = args.max_levels
    return ToolkitOptions(**updates)


def _emit(document: Any, out: str | None, filename: str) -> None:
    text = dumps(document)
    if out is not None:
        path = write_json(document, Path(out) / filename)
        logger.debug("wrote %s", path)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_derive(args: argparse.Namespace, doc: ModelDocument, options: ToolkitOptions) -> int:
    sys.stdout.write("\n".join(render_derivation(doc.model)) + "\n")
    return EXIT_OK


def cmd_check(args: argparse.Namespace, doc: ModelDocument, options: ToolkitOptions) -> int:
    m = doc.model
    points = random_lag_points(m, options.samples, options.seed)
    regularity = is_regular(m, points, options.regularity_tol)
    pullback = max(pullback_check(m, x, options.residual_tol).max_residual for x in points)
    result = verify_k(
        m, default_k(m), points, options.residual_tol, workers=options.resolved_workers()
    )
    passed = pullback <= options.residual_tol and result.kl_residual <= options.residual_tol
    document = {
        "model": m.name,
        "model_hash": m.model_hash,
        "samples": len(points),
        "seed": options.seed,
        "regular": regularity.regular,
        "rank": regularity.min_rank,
        "hessian_size": m.n * m.k,
        "pullback": {
            "max_residual": pullback,
            "tolerance": options.residual_tol,
            "pass": pullback <= options.residual_tol,
        },
        "kl": {
            "max_residual": result.kl_residual,
            "tolerance": options.residual_tol,
            "pass": result.kl_residual <= options.residual_tol,
            "conditions": result.conditions(),
        },
    }
    _emit(document, args.out, f"{m.name}_check.json")
    return EXIT_OK if passed else EXIT_FAILURE


def cmd_integrate(args: argparse.Namespace, doc: ModelDocument, options: ToolkitOptions) -> int:
    m = doc.model
    x0 = initial_point(doc, args.q, args.v)
    grid = _grid(doc, args.grid)
    ansatz = args.ansatz
    if ansatz == "auto":
        ansatz, _ = choose_ansatz(m, x0, options)
    X = sopde_field(m, ansatz, options.pivot_tol)
    psi = integrate_section(
        X,
        x0,
        grid,
        tol=options.residual_tol,
        substeps=options.substeps,
        blowup_threshold=options.blowup_threshold,
    )
    metadata: dict[str, Any] = {
        "model": m.name,
        "model_hash": m.model_hash,
        "ansatz": ansatz,
        "initial_point": x0.to_array(),
    }
    if doc.reference is not None:
        exact = reference_section(m.k, m.n, grid, doc.reference)
        gap = project_configuration(psi).values - exact.values
        metadata["reference"] = [to_string(e) for e in doc.reference]
        metadata["reference_max_error"] = max_over(gap, np.ones(grid.shape, dtype=bool))
    if psi.truncated:
        logger.warning("section truncated: %s", "; ".join(psi.diagnostics))

    out = Path(args.out or ".")
    written = []
    if args.format in (None, "csv"):
        written.append(write_section_csv(psi, out / f"{m.name}_section.csv"))
    if args.format in (None, "json"):
        written.append(write_section_json(psi, out / f"{m.name}_section.json", metadata))
    for path in written:
        sys.stdout.write(f"{path}\n")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, doc: ModelDocument, options: ToolkitOptions) -> int:
    m = doc.model
    report = equivalence_report(
        m,
        initial_point(doc, args.q, args.v),
        _grid(doc, args.grid),
        ansatz=args.ansatz,
        reference=doc.reference,
        samples=_samples(doc, options),
        options=options,
    )
    _emit(report.to_document(), args.out, f"{m.name}_report.json")
    return report.exit_code


def cmd_constraints(args: argparse.Namespace, doc: ModelDocument, options: ToolkitOptions) -> int:
    m = doc.model
    report = constraint_algorithm(
        m,
        [graph_point(m, x) for x in _samples(doc, options)],
        options.max_levels,
        options.residual_tol,
        pivot_tol=options.pivot_tol,
        submanifold_tol=options.submanifold_tol,
        workers=options.resolved_workers(),
    )
    _emit(report.to_document(), args.out, f"{m.name}_constraints.json")
    return EXIT_OK if report.stabilized else EXIT_FAILURE


COMMANDS = {
    "derive": cmd_derive,
    "check": cmd_check,
    "integrate": cmd_integrate,
    "verify": cmd_verify,
    "constraints": cmd_constraints,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="path to a TOML model file")
    common.add_argument("--samples", type=int, default=ToolkitOptions.samples, help="random sample count")
    common.add_argument("--seed", type=int, default=ToolkitOptions.seed, help="seed for random samples")
    common.add_argument("--tol", type=float, default=None, help="pointwise residual tolerance")
    common.add_argument("--workers", type=int, default=None, help="worker threads (default: KSYMP_THREADS or 1)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    section = argparse.ArgumentParser(add_help=False)
    section.add_argument("--q", default=None, help="initial positions, e.g. 0 or 0,1")
    section.add_argument("--v", default=None, help="initial velocities, rows separated by ';', e.g. 1,1")
    section.add_argument("--grid", default=None, help="parameter grid, e.g. t1=0:1:0.01,t2=0:1:0.01")
    section.add_argument(
        "--ansatz", choices=("auto", "symmetric", "uniform"), default="auto", help="SOPDE gauge"
    )

    parser = argparse.ArgumentParser(
        prog="ksymp", description="k-symplectic field theory toolkit"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("derive", parents=[common], help="print field equations and geometric structures")
    sub.add_parser("check", parents=[common], help="regularity, pullback and field-operator checks")
    integrate = sub.add_parser("integrate", parents=[common, section], help="integrate a section")
    integrate.add_argument("--format", choices=("csv", "json"), default=None, help="output format (default: both)")
    sub.add_parser("verify", parents=[common, section], help="equivalence report as JSON")
    constraints = sub.add_parser("constraints", parents=[common], help="constraint algorithm report as JSON")
    constraints.add_argument("--max-levels", type=int, default=None, help="highest constraint level")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        options = _options(args)
        options.configure_logging()
        doc = load_model(args.model)
        return COMMANDS[args.command](args, doc, options)
    except (ModelError, ValidationError) as exc:
        sys.stderr.write(f"ksymp: error: {exc}\n")
        return EXIT_USAGE
    except KSympError as exc:
        sys.stderr.write(f"ksymp: {type(exc).__name__}: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
