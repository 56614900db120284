"""Tests for expression parsing, printing, calculus and evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksymp import (
    EvaluationDomainError,
    ExpressionError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownFunctionError,
    as_expr,
    compile_expr,
    diff,
    evaluate,
    free_variables,
    parse,
    simplify,
    substitute,
    to_string,
)
from ksymp._expr import Binary, Const, Pow, Unary, Var, compile_many

NAMES = ("q1", "v1_1", "v1_2")
BINDINGS = {"q1": 0.7, "v1_1": -1.3, "v1_2": 0.4}

leaves = st.one_of(
    st.sampled_from([Var(name) for name in NAMES]),
    st.sampled_from([0.5, 1.0, 2.0, 3.25, 10.0]).map(Const),
)
trees = st.recursive(
    leaves,
    lambda children: st.one_of(
        st.tuples(st.sampled_from(["add", "sub", "mul"]), children, children).map(
            lambda t: Binary(*t)
        ),
        st.tuples(st.sampled_from(["neg", "sin", "cos"]), children).map(lambda t: Unary(*t)),
        st.tuples(children, st.sampled_from([2.0, 3.0])).map(lambda t: Pow(*t)),
    ),
    max_leaves=8,
)


class TestParse:
    """Tests for the expression grammar."""

    def test_precedence(self):
        """Test that ^ binds tighter than unary minus, which binds tighter than *."""
        assert evaluate(parse("-2^2"), {}) == -4.0
        assert evaluate(parse("2*3 + 4"), {}) == 10.0
        assert evaluate(parse("2*(3 + 4)"), {}) == 14.0

    def test_left_associativity(self):
        """Test that binary operators associate to the left."""
        assert evaluate(parse("8 - 4 - 2"), {}) == 2.0
        assert evaluate(parse("8/4/2"), {}) == 1.0
        assert evaluate(parse("2^3^2"), {}) == 64.0

    def test_functions(self):
        """Test the supported unary functions."""
        e = parse("sin(q1) + cos(q1) + exp(q1) + log(q1) + sqrt(q1)")
        x = 0.5
        expected = math.sin(x) + math.cos(x) + math.exp(x) + math.log(x) + math.sqrt(x)
        assert evaluate(e, {"q1": x}) == pytest.approx(expected, rel=1e-15)

    def test_variables(self):
        """Test identifiers of the coordinate naming scheme."""
        e = parse("q1*v1_2 + p2_1")
        assert free_variables(e) == frozenset({"q1", "v1_2", "p2_1"})

    def test_scientific_notation(self):
        """Test numbers with exponents."""
        assert evaluate(parse("1.5e-3*2"), {}) == pytest.approx(3e-3)

    def test_unknown_function(self):
        """Test that an unsupported call raises UnknownFunctionError with its offset."""
        with pytest.raises(UnknownFunctionError) as info:
            parse("q1 + tan(q1)")
        assert info.value.name == "tan"
        assert info.value.offset == 5

    @pytest.mark.parametrize("text", ["q1 +", "(q1", "q1 ** 2", "", "2 3"])
    def test_syntax_errors(self, text):
        """Test that malformed text raises ExpressionSyntaxError."""
        with pytest.raises(ExpressionSyntaxError):
            parse(text)

    def test_non_constant_exponent(self):
        """Test that a variable exponent is rejected."""
        with pytest.raises(ExpressionSyntaxError):
            parse("q1^v1_1")

    def test_as_expr(self):
        """Test coercion of numbers, text and expressions."""
        assert as_expr(2) == Const(2.0)
        assert as_expr("q1") == Var("q1")
        e = Var("q1")
        assert as_expr(e) is e
        with pytest.raises(TypeError):
            as_expr(True)


class TestPrinting:
    """Tests for the printer."""

    @pytest.mark.parametrize(
        "text",
        [
            "q1 - (v1_1 + v1_2)",
            "q1/(v1_1*v1_2)",
            "-q1^2",
            "(-q1)^2",
            "sin(q1)^2 + cos(q1)^2",
            "0.5*(v1_1^2 + v1_2^2) - q1^2",
        ],
    )
    def test_canonical_text_is_stable(self, text):
        """Test that printing a parsed canonical text gives the same text."""
        assert to_string(parse(text)) == text

    def test_integral_constants_print_without_point(self):
        """Test the number format."""
        assert to_string(Const(2.0)) == "2"
        assert to_string(Const(0.25)) == "0.25"

    def test_negative_exponent(self):
        """Test that negative exponents are parenthesized and reparse."""
        e = Pow(Var("q1"), -1.0)
        assert to_string(e) == "q1^(-1)"
        assert evaluate(parse(to_string(e)), {"q1": 4.0}) == 0.25

    @settings(max_examples=200, derandomize=True, deadline=None)
    @given(trees)
    def test_print_parse_round_trip(self, e):
        """Test that parse(to_string(e)) evaluates like e."""
        try:
            expected = evaluate(e, BINDINGS)
        except EvaluationDomainError:
            return
        if not math.isfinite(expected) or abs(expected) > 1e100:
            return
        again = parse(to_string(e))
        assert evaluate(again, BINDINGS) == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestCalculus:
    """Tests for differentiation, simplification and substitution."""

    def test_polynomial_derivative(self):
        """Test d/dq of a polynomial."""
        assert to_string(diff(parse("q1^2 + v1_1"), "q1")) == "2*q1"

    def test_derivative_of_absent_variable(self):
        """Test that an absent variable gives exactly zero."""
        assert diff(parse("sin(q1)"), "v1_1") == Const(0.0)

    def test_harmonic_momentum(self):
        """Test that the momentum of the harmonic Lagrangian simplifies to the velocity."""
        L = parse("0.5*(v1_1^2 + v1_2^2) - q1^2")
        assert diff(L, "v1_1") == Var("v1_1")
        assert to_string(diff(L, "q1")) == "-2*q1"

    @pytest.mark.parametrize(
        ("text", "name", "point"),
        [
            ("sin(q1)*exp(v1_1)", "q1", 0.3),
            ("log(q1)/sqrt(q1)", "q1", 1.7),
            ("(q1 + 1)^3 - cos(q1^2)", "q1", -0.4),
            ("q1/(1 + q1^2)", "q1", 0.9),
        ],
    )
    def test_derivative_matches_finite_difference(self, text, name, point):
        """Test symbolic derivatives against central differences."""
        e = parse(text)
        d = diff(e, name)
        h = 1e-6
        bindings = {"q1": point, "v1_1": 0.2}
        up = evaluate(e, {**bindings, name: point + h})
        down = evaluate(e, {**bindings, name: point - h})
        assert evaluate(d, bindings) == pytest.approx((up - down) / (2 * h), rel=1e-6)

    def test_simplify_rules(self):
        """Test identity, annihilator and folding rules."""
        assert simplify(parse("0*q1 + 1*v1_1")) == Var("v1_1")
        assert simplify(parse("2*3")) == Const(6.0)
        assert simplify(parse("-(-q1)")) == Var("q1")
        assert simplify(parse("q1^1")) == Var("q1")
        assert simplify(parse("q1^0")) == Const(1.0)

    def test_simplify_keeps_division_by_zero(self):
        """Test that 1/0 is not folded away."""
        e = simplify(parse("1/0"))
        with pytest.raises(EvaluationDomainError):
            evaluate(e, {})

    def test_substitute(self):
        """Test substitution of variables by expressions."""
        e = substitute(parse("p1_1*q1"), {"p1_1": "v1_1 + 1"})
        assert evaluate(e, {"q1": 2.0, "v1_1": 3.0}) == 8.0

    def test_operator_overloads(self):
        """Test building trees with Python operators."""
        q = Var("q1")
        e = (q * 2 + 1) ** 2
        assert evaluate(e, {"q1": 1.0}) == 9.0
        with pytest.raises(ExpressionError):
            q ** Var("v1_1")


class TestEvaluation:
    """Tests for scalar and vectorized evaluation."""

    def test_unbound_variable(self):
        """Test that a missing binding raises UnboundVariableError."""
        with pytest.raises(UnboundVariableError):
            evaluate(parse("q1 + q2"), {"q1": 1.0})

    @pytest.mark.parametrize("text", ["1/q1", "log(q1)", "sqrt(q1 - 1)", "q1^(-1)", "q1^0.5 - sqrt(-1)"])
    def test_domain_errors(self, text):
        """Test that domain violations raise EvaluationDomainError."""
        with pytest.raises(EvaluationDomainError):
            evaluate(parse(text), {"q1": 0.0})

    def test_overflow(self):
        """Test that overflow is a domain error."""
        with pytest.raises(EvaluationDomainError):
            evaluate(parse("exp(q1)"), {"q1": 1e4})

    def test_compiled_matches_scalar(self, rng):
        """Test that compiled evaluators agree with evaluate on random points."""
        e = parse("sin(q1)*v1_1^2 - v1_2/(2 + q1^2)")
        fn = compile_expr(e, NAMES)
        xs = rng.uniform(-1, 1, size=(3, 50))
        values = fn(xs)
        assert values.shape == (50,)
        for j in range(50):
            expected = evaluate(e, dict(zip(NAMES, xs[:, j])))
            assert values[j] == pytest.approx(expected, rel=1e-14, abs=1e-14)

    def test_compiled_constant_broadcasts(self):
        """Test that constants broadcast to the batch shape."""
        fn = compile_many([Const(3.0), Var("q1")], NAMES)
        out = fn(np.zeros((3, 4)))
        assert out.shape == (2, 4)
        assert np.all(out[0] == 3.0)

    def test_compiled_domain_error(self):
        """Test that compiled evaluators raise the same domain errors."""
        fn = compile_expr(parse("log(q1)"), NAMES)
        with pytest.raises(EvaluationDomainError):
            fn(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))

    def test_compiled_unbound(self):
        """Test that compiling over missing coordinates fails early."""
        with pytest.raises(UnboundVariableError):
            compile_expr(parse("p1_1"), NAMES)
