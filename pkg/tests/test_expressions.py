import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asdpde.expressions import (
    EvaluationError,
    ExpressionError,
    parse_field_expression,
)


class TestParsing:
    def test_number(self):
        assert parse_field_expression("2.5")(0.0) == 2.5

    def test_precedence(self):
        assert parse_field_expression("1+2*3")(0.0) == 7.0

    def test_parentheses(self):
        assert parse_field_expression("(1+2)*3")(0.0) == 9.0

    def test_power_binds_tighter_than_mul(self):
        assert parse_field_expression("2*3^2")(0.0) == 18.0

    def test_unary_minus(self):
        assert parse_field_expression("-x")(3.0) == -3.0

    def test_unary_minus_then_power_applies_to_negated_base(self):
        # factor := base ["^" number]; "-x" is a base, so (-x)^2
        assert parse_field_expression("-2^2")(0.0) == 4.0

    def test_scientific_notation(self):
        assert parse_field_expression("1e-2")(0.0) == pytest.approx(0.01)

    def test_functions(self):
        assert parse_field_expression("sin(x)")(0.5) == pytest.approx(np.sin(0.5))
        assert parse_field_expression("cos(x)")(0.5) == pytest.approx(np.cos(0.5))
        assert parse_field_expression("exp(x)")(0.5) == pytest.approx(np.exp(0.5))
        assert parse_field_expression("abs(x)")(-0.5) == 0.5

    def test_two_variables(self):
        assert parse_field_expression("x*y")(2.0, 3.0) == 6.0

    def test_vectorized(self):
        x = np.linspace(0.0, 1.0, 11)
        out = parse_field_expression("x^2 + 1")(x)
        np.testing.assert_allclose(out, x**2 + 1)

    def test_constant_broadcasts_to_input_shape(self):
        x = np.linspace(0.0, 1.0, 7)
        out = parse_field_expression("3")(x)
        assert out.shape == x.shape
        np.testing.assert_array_equal(out, np.full(7, 3.0))


class TestErrors:
    def test_trailing_input(self):
        with pytest.raises(ExpressionError):
            parse_field_expression("1 2")

    def test_incomplete(self):
        with pytest.raises(ExpressionError):
            parse_field_expression("x+")

    def test_unknown_identifier(self):
        with pytest.raises(ExpressionError, match="unknown identifier"):
            parse_field_expression("z")

    def test_unknown_character_has_offset(self):
        with pytest.raises(ExpressionError) as exc:
            parse_field_expression("x + @")
        assert exc.value.offset == 4

    def test_function_requires_parenthesis(self):
        with pytest.raises(ExpressionError):
            parse_field_expression("sin x")

    def test_exponent_must_be_literal(self):
        with pytest.raises(ExpressionError, match="exponent"):
            parse_field_expression("x^x")

    def test_division_by_zero_scalar(self):
        with pytest.raises(EvaluationError, match="division by zero"):
            parse_field_expression("1/x")(0.0)

    def test_division_by_zero_reports_node(self):
        expr = parse_field_expression("1/(x-0.5)")
        with pytest.raises(EvaluationError, match="node index 1"):
            expr(np.array([0.0, 0.5, 1.0]))

    def test_y_undefined_in_1d_context(self):
        with pytest.raises(EvaluationError, match="'y'"):
            parse_field_expression("y")(np.array([0.0, 1.0]))


# --- property tests ---------------------------------------------------------

_leaf = st.one_of(
    st.floats(min_value=0.0, max_value=9.0, allow_nan=False).map(
        lambda v: f"{v:.3f}"
    ),
    st.just("x"),
    st.just("y"),
)


def _expr_strings(depth=3):
    if depth == 0:
        return _leaf
    sub = _expr_strings(depth - 1)
    return st.one_of(
        _leaf,
        st.tuples(sub, st.sampled_from("+-*"), sub).map(
            lambda t: f"({t[0]} {t[1]} {t[2]})"
        ),
        st.tuples(st.sampled_from(["sin", "cos", "abs"]), sub).map(
            lambda t: f"{t[0]}({t[1]})"
        ),
        sub.map(lambda s: f"-{s}" if not s.startswith("-") else s),
    )


@settings(max_examples=200, deadline=None)
@given(_expr_strings())
def test_pretty_roundtrip_preserves_semantics(text):
    expr = parse_field_expression(text)
    again = parse_field_expression(expr.pretty())
    x = np.linspace(-1.0, 2.0, 5)
    y = np.linspace(0.5, 1.5, 5)
    np.testing.assert_allclose(expr(x, y), again(x, y), rtol=1e-12, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(_expr_strings())
def test_parsed_trees_evaluate_deterministically(text):
    expr = parse_field_expression(text)
    x = np.linspace(0.0, 1.0, 4)
    y = np.linspace(0.0, 1.0, 4)
    np.testing.assert_array_equal(expr(x, y), expr(x, y))
