"""Expression grammar: parsing, printing, evaluation, differentiation."""

import math

import numpy as np
import pytest

from ccembed import expr
from ccembed.errors import (EvaluationError, ExpressionSyntaxError,
                            UnknownIdentifierError)
from oracles import fd_derivative


def ev(source, **env):
    return expr.evaluate(expr.parse_expression(source), env)


def test_numbers_and_arithmetic():
    assert ev("2 + 3") == 5.0
    assert ev("2 + 3 * 4") == 14.0
    assert ev("(2 + 3) * 4") == 20.0
    assert ev("7 / 2") == 3.5
    assert ev("1.5e2") == 150.0
    assert ev(".25 * 8") == 2.0


def test_power_binds_tighter_than_unary_minus():
    assert ev("-2^2") == -4.0
    assert ev("(-2)^2") == 4.0


def test_power_is_right_associative():
    assert ev("2^3^2") == 512.0


def test_pi_and_functions():
    assert ev("cos(pi)") == pytest.approx(-1.0, abs=1e-15)
    assert ev("sqrt(y1)", y1=4.0) == 2.0
    assert ev("log(exp(2))") == pytest.approx(2.0, abs=1e-15)
    assert ev("sin(0)") == 0.0


def test_evaluation_broadcasts_arrays():
    y = np.linspace(0.0, 1.0, 7)
    out = ev("y1^2 + 1", y1=y)
    assert np.allclose(out, y ** 2 + 1)


def test_unknown_variable_at_parse_time():
    with pytest.raises(UnknownIdentifierError) as err:
        expr.parse_expression("y1 + zz", variables=("y1", "y2"))
    assert "zz" in str(err.value)
    assert err.value.position == 5


def test_unknown_variable_at_eval_time():
    e = expr.parse_expression("y1 + y3")
    with pytest.raises(EvaluationError):
        expr.evaluate(e, {"y1": 1.0})


def test_unknown_function():
    with pytest.raises(UnknownIdentifierError) as err:
        expr.parse_expression("tan(y1)")
    assert err.value.position == 0


def test_syntax_error_positions():
    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("sin(")
    assert err.value.position == 4
    assert "(at offset 4)" in str(err.value)

    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("1 + $")
    assert err.value.position == 4

    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("1 + )")
    assert err.value.position == 4

    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("(1 + 2")
    assert err.value.position == 6


def test_trailing_garbage_rejected():
    with pytest.raises(ExpressionSyntaxError):
        expr.parse_expression("1 2")


def test_free_variables():
    e = expr.parse_expression("sin(y1) * y2 + y1")
    assert expr.free_variables(e) == {"y1", "y2"}
    assert expr.free_variables(expr.parse_expression("3 + pi")) == set()


def test_constant_folding():
    assert expr.parse_expression("2 * 3 + 1") == expr.const(7.0)
    # folding must not hide domain errors behind non-finite constants
    e = expr.parse_expression("log(0)")
    assert not isinstance(e, expr.Const)


def _random_tree(rng, names, depth):
    """Random expression over sin/cos/+/-/* with bounded magnitudes."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return expr.const(float(rng.uniform(-2.0, 2.0)))
        return expr.var(str(rng.choice(names)))
    pick = rng.random()
    if pick < 0.25:
        return expr.call("sin", _random_tree(rng, names, depth - 1))
    if pick < 0.5:
        return expr.call("cos", _random_tree(rng, names, depth - 1))
    if pick < 0.65:
        return expr.neg(_random_tree(rng, names, depth - 1))
    a = _random_tree(rng, names, depth - 1)
    b = _random_tree(rng, names, depth - 1)
    if pick < 0.8:
        return expr.add(a, b)
    if pick < 0.9:
        return expr.sub(a, b)
    return expr.mul(a, b)


def test_print_parse_round_trip_random():
    rng = np.random.default_rng(7)
    names = ("y1", "y2")
    for _ in range(120):
        tree = _random_tree(rng, names, 5)
        again = expr.parse_expression(expr.to_source(tree))
        assert again == tree, expr.to_source(tree)


def test_round_trip_explicit_precedence_cases():
    for src in ("(y1 + 1) * y2", "y1 - (y2 - 1)", "y1 / (y2 * y2)",
                "(y1 + y2)^2", "y1^-2", "-(y1 + y2)", "2 / (1 + y1)^2"):
        tree = expr.parse_expression(src)
        assert expr.parse_expression(expr.to_source(tree)) == tree


def test_symbolic_derivative_against_difference_oracle():
    rng = np.random.default_rng(11)
    names = ("y1", "y2")
    base = {"y1": 0.37, "y2": -0.61}
    checked = 0
    for _ in range(150):
        tree = _random_tree(rng, names, 4)
        if "y1" not in expr.free_variables(tree):
            continue
        d = expr.differentiate(tree, "y1")

        def f(t):
            return float(expr.evaluate(tree, {"y1": t, "y2": base["y2"]}))

        want = fd_derivative(f, base["y1"], h=1e-4)
        got = float(expr.evaluate(d, base))
        assert got == pytest.approx(want, abs=1e-7, rel=1e-6)
        checked += 1
    assert checked > 40


def test_derivative_of_awkward_composites():
    cases = [
        ("exp(0.3*sin(y1)) * (1 - y1^2)", 0.4),
        ("sqrt(1 + y1^2)", 0.7),
        ("log(2 + cos(y1))", 1.1),
        ("1 / (0.75 + 0.25*cos(y1))", 0.3),
        ("y1^3 - 2*y1 + y1^0.5", 0.9),
    ]
    for src, at in cases:
        tree = expr.parse_expression(src)
        d = expr.differentiate(tree, "y1")

        def f(t, tree=tree):
            return float(expr.evaluate(tree, {"y1": t}))

        want = fd_derivative(f, at, h=1e-5)
        got = float(expr.evaluate(d, {"y1": at}))
        assert got == pytest.approx(want, rel=1e-7, abs=1e-9)


def test_derivative_of_missing_variable_is_zero():
    e = expr.parse_expression("sin(y2) + 3")
    assert expr.differentiate(e, "y1") == expr.const(0.0)
