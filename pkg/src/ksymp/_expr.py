"""Expression trees over named real variables.

Nodes are frozen dataclasses, so trees are hashable, comparable and safe to share
between threads. Traversals (differentiation, simplification, evaluation,
printing) dispatch on the node type.

Example:
    >>> e = parse("q1^2 + v1_1")
    >>> str(diff(e, "q1"))
    '2*q1'
    >>> evaluate(e, {"q1": 2.0, "v1_1": 1.0})
    5.0
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache, singledispatch
from typing import Any, Union

import numpy as np
import pyparsing as pp

from ._constants import FUNCTIONS
from ._errors import (
    EvaluationDomainError,
    EvaluationError,
    ExpressionError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownFunctionError,
)

Number = Union[int, float]
ExprLike = Union["Expr", int, float, str]

UNARY_OPS: tuple[str, ...] = ("neg", *FUNCTIONS)
BINARY_OPS: tuple[str, ...] = ("add", "sub", "mul", "div")


class Expr:
    """Base class for expression nodes."""

    def __add__(self, other: ExprLike) -> Expr:
        return Binary("add", self, as_expr(other))

    def __radd__(self, other: ExprLike) -> Expr:
        return Binary("add", as_expr(other), self)

    def __sub__(self, other: ExprLike) -> Expr:
        return Binary("sub", self, as_expr(other))

    def __rsub__(self, other: ExprLike) -> Expr:
        return Binary("sub", as_expr(other), self)

    def __mul__(self, other: ExprLike) -> Expr:
        return Binary("mul", self, as_expr(other))

    def __rmul__(self, other: ExprLike) -> Expr:
        return Binary("mul", as_expr(other), self)

    def __truediv__(self, other: ExprLike) -> Expr:
        return Binary("div", self, as_expr(other))

    def __rtruediv__(self, other: ExprLike) -> Expr:
        return Binary("div", as_expr(other), self)

    def __neg__(self) -> Expr:
        return Unary("neg", self)

    def __pow__(self, exponent: Any) -> Expr:
        if isinstance(exponent, Const):
            exponent = exponent.value
        if isinstance(exponent, bool) or not isinstance(exponent, (int, float)):
            raise ExpressionError("exponents must be constant numbers")
        return Pow(self, float(exponent))

    def __str__(self) -> str:
        return to_string(self)

    def diff(self, name: str) -> Expr:
        return diff(self, name)

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        return evaluate(self, bindings)

    def simplify(self) -> Expr:
        return simplify(self)

    def subs(self, mapping: Mapping[str, ExprLike]) -> Expr:
        return substitute(self, mapping)

    @property
    def free_variables(self) -> frozenset[str]:
        return free_variables(self)


@dataclass(frozen=True, repr=True)
class Const(Expr):
    """Real constant."""

    value: float

    def __post_init__(self) -> None:
        # -0.0 and 0.0 compare equal; store the positive zero so printing is stable
        object.__setattr__(self, "value", float(self.value) + 0.0)


@dataclass(frozen=True)
class Var(Expr):
    """Named real variable."""

    name: str


@dataclass(frozen=True)
class Unary(Expr):
    """Negation or one of the supported elementary functions."""

    op: str
    arg: Expr

    def __post_init__(self) -> None:
        if self.op not in UNARY_OPS:
            raise UnknownFunctionError(self.op)


@dataclass(frozen=True)
class Binary(Expr):
    """Arithmetic node: add, sub, mul or div."""

    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in BINARY_OPS:
            raise ExpressionError(f"unknown binary operation {self.op!r}")


@dataclass(frozen=True)
class Pow(Expr):
    """Power with a constant exponent."""

    base: Expr
    exponent: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponent", float(self.exponent) + 0.0)


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value: ExprLike) -> Expr:
    """Coerce numbers and expression text to an Expr."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def var(name: str) -> Var:
    return Var(name)


def const(value: Number) -> Const:
    return Const(float(value))


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def free_variables(e: Expr) -> frozenset[str]:
    """Names of all variables occurring in ``e``."""
    names: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Pow):
            stack.append(node.base)
    return frozenset(names)


# ---------------------------------------------------------------------------
# Scalar arithmetic with domain checks
# ---------------------------------------------------------------------------


def _apply_unary(op: str, x: float) -> float:
    if op == "neg":
        return -x
    if op == "sin":
        return math.sin(x)
    if op == "cos":
        return math.cos(x)
    if op == "exp":
        try:
            return math.exp(x)
        except OverflowError as e:
            raise EvaluationDomainError(f"exp({x!r}) overflows") from e
    if op == "log":
        if x <= 0.0:
            raise EvaluationDomainError(f"log of non-positive value {x!r}")
        return math.log(x)
    if op == "sqrt":
        if x < 0.0:
            raise EvaluationDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    raise UnknownFunctionError(op)


def _apply_binary(op: str, a: float, b: float) -> float:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if b == 0.0:
        raise EvaluationDomainError("division by zero")
    return a / b


def _apply_pow(base: float, exponent: float) -> float:
    try:
        if exponent.is_integer():
            if base == 0.0 and exponent < 0:
                raise EvaluationDomainError("zero raised to a negative power")
            return float(base ** int(exponent))
        if base <= 0.0:
            raise EvaluationDomainError(
                f"non-integer power {exponent!r} of non-positive base {base!r}"
            )
        return math.exp(exponent * math.log(base))
    except OverflowError as e:
        raise EvaluationDomainError(f"{base!r}^{exponent!r} overflows") from e


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@singledispatch
def _eval(e: Expr, bindings: Mapping[str, float]) -> float:
    raise TypeError(f"not an expression node: {e!r}")


@_eval.register(Const)
def _(e: Const, bindings: Mapping[str, float]) -> float:
    return e.value


@_eval.register(Var)
def _(e: Var, bindings: Mapping[str, float]) -> float:
    try:
        return float(bindings[e.name])
    except KeyError:
        raise UnboundVariableError(e.name) from None


@_eval.register(Unary)
def _(e: Unary, bindings: Mapping[str, float]) -> float:
    return _apply_unary(e.op, _eval(e.arg, bindings))


@_eval.register(Binary)
def _(e: Binary, bindings: Mapping[str, float]) -> float:
    return _apply_binary(e.op, _eval(e.left, bindings), _eval(e.right, bindings))


@_eval.register(Pow)
def _(e: Pow, bindings: Mapping[str, float]) -> float:
    return _apply_pow(_eval(e.base, bindings), e.exponent)


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` in IEEE double precision.

    Args:
        e: Expression to evaluate.
        bindings: Values for every free variable of ``e``.

    Returns:
        The value as a Python float.

    Raises:
        UnboundVariableError: A free variable has no binding.
        EvaluationDomainError: Division by zero, log of a non-positive number,
            square root of a negative number, or overflow.
    """
    return _eval(e, bindings)


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------


def _negate(u: Expr) -> Expr:
    if isinstance(u, Const):
        return Const(-u.value)
    if isinstance(u, Unary) and u.op == "neg":
        return u.arg
    if isinstance(u, Binary) and u.op == "mul" and isinstance(u.left, Const):
        return _mul(Const(-u.left.value), u.right)
    if isinstance(u, Binary) and u.op == "sub":
        return Binary("sub", u.right, u.left)
    return Unary("neg", u)


def _fold(op: str, a: float, b: float) -> Const | None:
    try:
        value = _apply_binary(op, a, b)
    except EvaluationError:
        return None
    return Const(value) if math.isfinite(value) else None


def _add(left: Expr, right: Expr) -> Expr:
    if is_zero(left):
        return right
    if is_zero(right):
        return left
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold("add", left.value, right.value)
        if folded is not None:
            return folded
    if isinstance(right, Unary) and right.op == "neg":
        return _sub(left, right.arg)
    if isinstance(right, Const) and right.value < 0:
        return Binary("sub", left, Const(-right.value))
    return Binary("add", left, right)


def _sub(left: Expr, right: Expr) -> Expr:
    if is_zero(right):
        return left
    if is_zero(left):
        return _negate(right)
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold("sub", left.value, right.value)
        if folded is not None:
            return folded
    if isinstance(right, Unary) and right.op == "neg":
        return _add(left, right.arg)
    if isinstance(right, Const) and right.value < 0:
        return Binary("add", left, Const(-right.value))
    return Binary("sub", left, right)


def _mul(left: Expr, right: Expr) -> Expr:
    if is_zero(left) or is_zero(right):
        return ZERO
    if is_one(left):
        return right
    if is_one(right):
        return left
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold("mul", left.value, right.value)
        if folded is not None:
            return folded
    if isinstance(right, Const) and not isinstance(left, Const):
        left, right = right, left
    if isinstance(left, Const):
        if left.value == -1.0:
            return _negate(right)
        if isinstance(right, Binary) and right.op == "mul" and isinstance(right.left, Const):
            folded = _fold("mul", left.value, right.left.value)
            if folded is not None:
                return _mul(folded, right.right)
        if isinstance(right, Unary) and right.op == "neg":
            return _mul(Const(-left.value), right.arg)
    if (
        isinstance(left, Unary)
        and left.op == "neg"
        and isinstance(right, Unary)
        and right.op == "neg"
    ):
        return _mul(left.arg, right.arg)
    return Binary("mul", left, right)


def _div(left: Expr, right: Expr) -> Expr:
    if is_zero(right):
        return Binary("div", left, right)
    if is_zero(left):
        return ZERO
    if is_one(right):
        return left
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold("div", left.value, right.value)
        if folded is not None:
            return folded
    return Binary("div", left, right)


_BUILDERS: dict[str, Callable[[Expr, Expr], Expr]] = {
    "add": _add,
    "sub": _sub,
    "mul": _mul,
    "div": _div,
}


@singledispatch
def _simplify(e: Expr) -> Expr:
    return e


@_simplify.register(Unary)
def _(e: Unary) -> Expr:
    arg = _simplify(e.arg)
    if e.op == "neg":
        return _negate(arg)
    if isinstance(arg, Const):
        try:
            return Const(_apply_unary(e.op, arg.value))
        except EvaluationError:
            pass
    return Unary(e.op, arg)


@_simplify.register(Binary)
def _(e: Binary) -> Expr:
    return _BUILDERS[e.op](_simplify(e.left), _simplify(e.right))


@_simplify.register(Pow)
def _(e: Pow) -> Expr:
    base = _simplify(e.base)
    if e.exponent == 1.0:
        return base
    if e.exponent == 0.0:
        return ONE
    if isinstance(base, Const):
        try:
            value = _apply_pow(base.value, e.exponent)
        except EvaluationError:
            return Pow(base, e.exponent)
        if math.isfinite(value):
            return Const(value)
    return Pow(base, e.exponent)


def simplify(e: Expr) -> Expr:
    """Rewrite ``e`` with identity, annihilator and constant-folding rules.

    The result evaluates to the same value as ``e`` wherever ``e`` is defined;
    no normal form is promised.
    """
    return _simplify(e)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


@singledispatch
def _derivative(e: Expr, name: str) -> Expr:
    raise TypeError(f"not an expression node: {e!r}")


@_derivative.register(Const)
def _(e: Const, name: str) -> Expr:
    return ZERO


@_derivative.register(Var)
def _(e: Var, name: str) -> Expr:
    return ONE if e.name == name else ZERO


@_derivative.register(Unary)
def _(e: Unary, name: str) -> Expr:
    du = _derivative(e.arg, name)
    if is_zero(du):
        return ZERO
    u = e.arg
    if e.op == "neg":
        return Unary("neg", du)
    if e.op == "sin":
        return Unary("cos", u) * du
    if e.op == "cos":
        return Unary("neg", Unary("sin", u)) * du
    if e.op == "exp":
        return Unary("exp", u) * du
    if e.op == "log":
        return du / u
    return du / (Const(2.0) * Unary("sqrt", u))


@_derivative.register(Binary)
def _(e: Binary, name: str) -> Expr:
    dl = _derivative(e.left, name)
    dr = _derivative(e.right, name)
    if is_zero(dl) and is_zero(dr):
        return ZERO
    if e.op == "add":
        return dl + dr
    if e.op == "sub":
        return dl - dr
    if e.op == "mul":
        return dl * e.right + e.left * dr
    if is_zero(dr):
        return dl / e.right
    return (dl * e.right - e.left * dr) / Pow(e.right, 2.0)


@_derivative.register(Pow)
def _(e: Pow, name: str) -> Expr:
    db = _derivative(e.base, name)
    if is_zero(db):
        return ZERO
    return Const(e.exponent) * Pow(e.base, e.exponent - 1.0) * db


def diff(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``name``.

    Every other variable is treated as independent of ``name``.
    """
    if name not in free_variables(e):
        return ZERO
    return simplify(_derivative(e, name))


def gradient(e: Expr, names: Sequence[str]) -> tuple[Expr, ...]:
    return tuple(diff(e, name) for name in names)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def substitute(e: Expr, mapping: Mapping[str, ExprLike]) -> Expr:
    """Replace variables by expressions; unmapped variables are left alone."""
    resolved = {name: as_expr(value) for name, value in mapping.items()}
    return simplify(_substitute(e, resolved))


@singledispatch
def _substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    return e


@_substitute.register(Var)
def _(e: Var, mapping: Mapping[str, Expr]) -> Expr:
    return mapping.get(e.name, e)


@_substitute.register(Unary)
def _(e: Unary, mapping: Mapping[str, Expr]) -> Expr:
    return Unary(e.op, _substitute(e.arg, mapping))


@_substitute.register(Binary)
def _(e: Binary, mapping: Mapping[str, Expr]) -> Expr:
    return Binary(e.op, _substitute(e.left, mapping), _substitute(e.right, mapping))


@_substitute.register(Pow)
def _(e: Pow, mapping: Mapping[str, Expr]) -> Expr:
    return Pow(_substitute(e.base, mapping), e.exponent)


# ---------------------------------------------------------------------------
# Vectorized evaluation
# ---------------------------------------------------------------------------

ArrayFn = Callable[[np.ndarray], Any]


def _checked(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values) | np.isnan(values)):
        raise EvaluationDomainError(f"{what} overflows")
    return values


def _np_unary(op: str, fn: ArrayFn) -> ArrayFn:
    if op == "neg":
        return lambda x: -fn(x)
    if op == "sin":
        return lambda x: np.sin(fn(x))
    if op == "cos":
        return lambda x: np.cos(fn(x))
    if op == "exp":
        return lambda x: _checked(np.exp(fn(x)), "exp")

    def guarded(x: np.ndarray) -> Any:
        u = fn(x)
        if op == "log":
            if np.any(u <= 0.0):
                raise EvaluationDomainError("log of non-positive value")
            return np.log(u)
        if np.any(u < 0.0):
            raise EvaluationDomainError("sqrt of negative value")
        return np.sqrt(u)

    return guarded


def _np_binary(op: str, left: ArrayFn, right: ArrayFn) -> ArrayFn:
    if op == "add":
        return lambda x: left(x) + right(x)
    if op == "sub":
        return lambda x: left(x) - right(x)
    if op == "mul":
        return lambda x: left(x) * right(x)

    def divide(x: np.ndarray) -> Any:
        den = right(x)
        if np.any(den == 0.0):
            raise EvaluationDomainError("division by zero")
        return left(x) / den

    return divide


def _np_pow(base: ArrayFn, exponent: float) -> ArrayFn:
    if exponent.is_integer():
        power = int(exponent)

        def integral(x: np.ndarray) -> Any:
            b = base(x)
            if power < 0 and np.any(b == 0.0):
                raise EvaluationDomainError("zero raised to a negative power")
            return _checked(np.power(b, float(power)), "power")

        return integral

    def real(x: np.ndarray) -> Any:
        b = base(x)
        if np.any(b <= 0.0):
            raise EvaluationDomainError(f"non-integer power {exponent!r} of non-positive base")
        return _checked(np.exp(exponent * np.log(b)), "power")

    return real


def _build(e: Expr, index: Mapping[str, int]) -> ArrayFn:
    if isinstance(e, Const):
        value = e.value
        return lambda x: value
    if isinstance(e, Var):
        if e.name not in index:
            raise UnboundVariableError(e.name)
        i = index[e.name]
        return lambda x: x[i]
    if isinstance(e, Unary):
        return _np_unary(e.op, _build(e.arg, index))
    if isinstance(e, Binary):
        return _np_binary(e.op, _build(e.left, index), _build(e.right, index))
    if isinstance(e, Pow):
        return _np_pow(_build(e.base, index), e.exponent)
    raise TypeError(f"not an expression node: {e!r}")


def compile_expr(e: Expr, coordinates: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``e`` into a numpy evaluator over a coordinate vector.

    The evaluator takes an array whose leading axis runs over ``coordinates``
    (shape ``(N,)`` or ``(N, ...)``) and returns an array of the trailing shape.
    It raises the same domain errors as :func:`evaluate`.
    """
    index = {name: i for i, name in enumerate(coordinates)}
    fn = _build(e, index)

    def evaluator(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = fn(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[1:]).copy()

    return evaluator


def compile_many(
    exprs: Iterable[Expr], coordinates: Sequence[str]
) -> Callable[[np.ndarray], np.ndarray]:
    """Compile several expressions into one evaluator returning a stacked array."""
    fns = [compile_expr(e, coordinates) for e in exprs]

    def evaluator(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not fns:
            return np.zeros((0, *x.shape[1:]))
        return np.stack([fn(x) for fn in fns])

    return evaluator


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_SYMBOLS = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}
_LEVEL = {"add": 1, "sub": 1, "mul": 2, "div": 2}
_ATOM = 5


def format_number(value: float) -> str:
    """Shortest text that reparses to ``value``; integral values print without a point."""
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _level(e: Expr) -> int:
    if isinstance(e, Const):
        return 3 if e.value < 0 else _ATOM
    if isinstance(e, Var):
        return _ATOM
    if isinstance(e, Unary):
        return 3 if e.op == "neg" else _ATOM
    if isinstance(e, Binary):
        return _LEVEL[e.op]
    return 4


def _wrapped(e: Expr, parens: bool) -> str:
    text = to_string(e)
    return f"({text})" if parens else text


def to_string(e: Expr) -> str:
    """Render ``e`` in the input grammar with the parentheses it needs to reparse."""
    if isinstance(e, Const):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrapped(e.arg, _level(e.arg) <= 3)
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        level = _LEVEL[e.op]
        left = _wrapped(e.left, _level(e.left) < level)
        right = _wrapped(e.right, _level(e.right) <= level)
        return f"{left}{_SYMBOLS[e.op]}{right}"
    if isinstance(e, Pow):
        exponent = format_number(e.exponent)
        if e.exponent < 0:
            exponent = f"({exponent})"
        return f"{_wrapped(e.base, _level(e.base) < _ATOM)}^{exponent}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CALL = re.compile(r"([A-Za-z][A-Za-z0-9_]*)\s*\(")


def _fold_binary(s: str, loc: int, toks: pp.ParseResults) -> Expr:
    items = toks[0]
    result = items[0]
    for symbol, operand in zip(items[1::2], items[2::2]):
        op = {"+": "add", "-": "sub", "*": "mul", "/": "div"}[symbol]
        result = Binary(op, result, operand)
    return result


def _fold_pow(s: str, loc: int, toks: pp.ParseResults) -> Expr:
    items = toks[0]
    result = items[0]
    for exponent in items[2::2]:
        if free_variables(exponent):
            raise pp.ParseFatalException(s, loc, "exponent must be a constant")
        try:
            value = evaluate(exponent, {})
        except EvaluationError as e:
            raise pp.ParseFatalException(s, loc, f"invalid exponent: {e}") from e
        result = Pow(result, value)
    return result


def _negation(s: str, loc: int, toks: pp.ParseResults) -> Expr:
    return Unary("neg", toks[0][1])


@lru_cache(maxsize=1)
def _grammar() -> pp.ParserElement:
    pp.ParserElement.enable_packrat()

    number = pp.Regex(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?").set_name("number")
    number.set_parse_action(lambda t: Const(float(t[0])))
    identifier = pp.Regex(r"[A-Za-z][A-Za-z0-9_]*").set_name("identifier")

    expr = pp.Forward()
    call = identifier + pp.Suppress("(") + expr + pp.Suppress(")")
    call.set_parse_action(lambda t: Unary(t[0], t[1]))
    variable = identifier.copy().set_parse_action(lambda t: Var(t[0]))

    arithmetic = pp.infix_notation(
        call | number | variable,
        [
            (pp.Literal("^"), 2, pp.OpAssoc.LEFT, _fold_pow),
            (pp.Literal("-"), 1, pp.OpAssoc.RIGHT, _negation),
            (pp.one_of("* /"), 2, pp.OpAssoc.LEFT, _fold_binary),
            (pp.one_of("+ -"), 2, pp.OpAssoc.LEFT, _fold_binary),
        ],
    )
    expr <<= arithmetic
    return expr


def _byte_offset(text: str, loc: int) -> int:
    return len(text[:loc].encode("utf-8"))


def parse(text: str) -> Expr:
    """Parse infix expression text.

    Precedence from tightest: ``^``, unary minus, ``*`` and ``/``, ``+`` and
    ``-``; binary operators associate to the left.

    Raises:
        UnknownFunctionError: A call names something other than sin, cos,
            exp, log or sqrt.
        ExpressionSyntaxError: The text is not in the grammar; ``offset`` is the
            byte position of the failure.
    """
    for match in _CALL.finditer(text):
        if match.group(1) not in FUNCTIONS:
            raise UnknownFunctionError(match.group(1), _byte_offset(text, match.start()))
    try:
        result = _grammar().parse_string(text, parse_all=True)
    except pp.ParseBaseException as e:
        raise ExpressionSyntaxError(e.msg, _byte_offset(text, e.loc)) from e
    return result[0]
