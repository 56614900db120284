"""TOML model documents.

A model file looks like::

    name = "harmonic"
    k = 2
    n = 1
    lagrangian = "0.5*(v1_1^2 + v1_2^2) - q1^2"
    hamiltonian = "0.5*(p1_1^2 + p2_1^2) + q1^2"
    reference = ["sin(t1 + t2)"]

    [samples.origin]
    q = [0.0]
    v = [[1.0, 1.0]]

``v`` is given row by row, one row of k velocities per field component.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ._errors import KSympError, ModelFileError
from ._expr import Expr, as_expr
from ._types import FieldModel, LagPoint

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_DECODE_LINE = re.compile(r"line (\d+)")
KNOWN_KEYS = frozenset(
    {"name", "k", "n", "lagrangian", "hamiltonian", "constraints", "reference", "samples"}
)


@dataclass(frozen=True, eq=False)
class ModelDocument:
    """A parsed model file."""

    model: FieldModel
    samples: dict[str, LagPoint] = field(default_factory=dict)
    """Named points of T¹ₖQ, in file order."""

    reference: tuple[Expr, ...] | None = None
    """Analytic configuration section in t1..tk, one expression per component."""

    source: str = "<string>"


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*(\[\s*samples\.)?{re.escape(key)}\b")
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def _expression(value: Any, key: str, text: str, source: str) -> Expr:
    if not isinstance(value, str):
        raise ModelFileError(f"{key} must be an expression string", _line_of(text, key), source)
    try:
        return as_expr(value)
    except KSympError as exc:
        raise ModelFileError(f"{key}: {exc}", _line_of(text, key), source) from exc


def _sample(name: str, table: Any, k: int, n: int, text: str, source: str) -> LagPoint:
    line = _line_of(text, name)
    if not isinstance(table, dict) or set(table) - {"q", "v"}:
        raise ModelFileError(f"sample {name!r} must be a table with keys q and v", line, source)
    q = table.get("q", [0.0] * n)
    v = table.get("v", [[0.0] * k for _ in range(n)])
    try:
        point = LagPoint(q, v)
    except KSympError as exc:
        raise ModelFileError(f"sample {name!r}: {exc}", line, source) from exc
    if point.n != n or point.k != k:
        raise ModelFileError(
            f"sample {name!r} has (k={point.k}, n={point.n}), expected (k={k}, n={n})", line, source
        )
    return point


def parse_model(text: str, source: str = "<string>") -> ModelDocument:
    """Parse a model document from TOML text.

    Raises:
        ModelFileError: Malformed TOML or invalid content, with the 1-based line
            number where it could be located.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _DECODE_LINE.search(str(exc))
        line = int(match.group(1)) if match else None
        raise ModelFileError(f"invalid TOML: {exc}", line, source) from exc

    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ModelFileError(f"unknown key {unknown[0]!r}", _line_of(text, unknown[0]), source)
    for key in ("k", "n", "lagrangian"):
        if key not in data:
            raise ModelFileError(f"missing required key {key!r}", None, source)
    k, n = data["k"], data["n"]
    for key, value in (("k", k), ("n", n)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ModelFileError(f"{key} must be a positive integer", _line_of(text, key), source)

    lagrangian = _expression(data["lagrangian"], "lagrangian", text, source)
    hamiltonian = None
    if "hamiltonian" in data:
        hamiltonian = _expression(data["hamiltonian"], "hamiltonian", text, source)
    raw_constraints = data.get("constraints", [])
    if not isinstance(raw_constraints, list):
        raise ModelFileError("constraints must be a list", _line_of(text, "constraints"), source)
    constraints = tuple(_expression(c, "constraints", text, source) for c in raw_constraints)

    try:
        model = FieldModel(
            k,
            n,
            lagrangian,
            name=str(data.get("name", "model" if source.startswith("<") else Path(source).stem)),
            hamiltonian=hamiltonian,
            constraints=constraints,
        )
    except KSympError as exc:
        raise ModelFileError(str(exc), _line_of(text, "lagrangian"), source) from exc

    reference = None
    if "reference" in data:
        raw = data["reference"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ModelFileError(
                f"reference must list {n} expression(s)", _line_of(text, "reference"), source
            )
        reference = tuple(_expression(e, "reference", text, source) for e in raw)

    tables = data.get("samples", {})
    if not isinstance(tables, dict):
        raise ModelFileError("samples must be a table", _line_of(text, "samples"), source)
    samples = {name: _sample(name, table, k, n, text, source) for name, table in tables.items()}
    return ModelDocument(model, samples, reference, source)


def load_model(path: str | Path) -> ModelDocument:
    """Read and parse a model file.

    Raises:
        ModelFileError: The file cannot be read or parsed.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError(f"cannot read model file: {exc}", None, str(path)) from exc
    return parse_model(text, str(path))
