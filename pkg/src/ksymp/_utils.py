"""Internal utilities for ksymp: deterministic JSON and seeded sample points."""

from __future__ import annotations

import json
import math
from collections.abc import Iterator, Mapping
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from ._constants import DEFAULT_SAMPLE_SCALE, DEFAULT_SEED, FLOAT_DIGITS, JSON_INDENT
from ._types import LagPoint

if TYPE_CHECKING:
    from ._types import FieldModel


def jsonable(value: Any) -> Any:
    """Convert numpy values, dataclasses and tuples to plain JSON data.

    Non-finite floats become ``None`` so documents always parse as strict JSON.
    """
    if isinstance(value, Mapping):
        return {str(key): jsonable(item) for key, item in value.items()}
    if is_dataclass(value) and not isinstance(value, type):
        return jsonable(asdict(value))
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def format_float(value: float) -> str:
    """Float text with FLOAT_DIGITS significant digits, empty for non-finite values.

    Integral values keep a trailing ".0" so they read back as floats.
    """
    value = float(value)
    if not math.isfinite(value):
        return ""
    text = format(value, f".{FLOAT_DIGITS}g")
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def _json_float(value: float) -> str:
    text = format_float(value)
    if not text:
        raise ValueError(f"out of range float value in JSON: {value!r}")
    return text


class FixedDigitsEncoder(json.JSONEncoder):
    """JSON encoder that prints every float with FLOAT_DIGITS significant digits."""

    def iterencode(self, o: Any, _one_shot: bool = False) -> Iterator[str]:
        indent = " " * self.indent if isinstance(self.indent, int) else self.indent
        if self.ensure_ascii:
            encode_string = json.encoder.encode_basestring_ascii
        else:
            encode_string = json.encoder.encode_basestring
        markers: dict[int, Any] | None = {} if self.check_circular else None
        encode = json.encoder._make_iterencode(  # type: ignore[attr-defined]
            markers,
            self.default,
            encode_string,
            indent,
            _json_float,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )
        return encode(o, 0)


def dumps(document: Any) -> str:
    """Serialize ``document`` deterministically.

    Key order is the insertion order of the builders, floats carry
    FLOAT_DIGITS significant digits, and the output ends with a newline.
    """
    return json.dumps(jsonable(document), indent=JSON_INDENT, cls=FixedDigitsEncoder) + "\n"


def write_json(document: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document), encoding="utf-8")
    return path


def random_lag_points(
    m: FieldModel,
    count: int,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SAMPLE_SCALE,
    fixed: Mapping[str, float] | None = None,
) -> list[LagPoint]:
    """``count`` points of T¹ₖQ with coordinates uniform in [-scale, scale].

    Args:
        m: Model fixing (k, n).
        count: Number of points.
        seed: Seed for ``numpy.random.default_rng``.
        scale: Half-width of the sampling box.
        fixed: Coordinates pinned to given values, e.g. ``{"v1_2": 0.0}``.
    """
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-scale, scale, size=(count, m.lag_dim))
    if fixed:
        index = {name: i for i, name in enumerate(m.lag_coords)}
        for name, value in fixed.items():
            raw[:, index[name]] = value
    return [LagPoint.from_array(row, m.k, m.n) for row in raw]
