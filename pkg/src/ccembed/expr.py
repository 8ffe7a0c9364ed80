"""Scalar expression mini-language: parsing, printing, evaluation, exact
differentiation.

Grammar (EBNF)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := NUMBER | "pi" | VARIABLE | FUNCTION "(" expr ")" | "(" expr ")"

    FUNCTION := "sin" | "cos" | "exp" | "log" | "sqrt"
    NUMBER   := decimal literal with optional fraction and exponent
    VARIABLE := letter (letter | digit | "_")*

Unary minus binds looser than "^", so ``-r^2`` means ``-(r^2)``.  Trees are
built through the smart constructors (:func:`add`, :func:`mul`, ...) which
fold constants and drop trivial identities; any tree built that way
round-trips structurally through :func:`to_source` and :func:`parse_expression`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "parse_expression",
    "to_source",
    "evaluate",
    "differentiate",
    "free_variables",
    "add",
    "sub",
    "mul",
    "div",
    "powe",
    "neg",
    "call",
    "const",
    "var",
    "KNOWN_FUNCTIONS",
]

KNOWN_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


@dataclass(frozen=True)
class Expression:
    """Base class for expression tree nodes."""

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return powe(self, _coerce(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class BinOp(Expression):
    op: str  # one of "+-*/^"
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    fn: str
    arg: Expression


def _coerce(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} as an expression operand")


def const(value: float) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


# --- smart constructors -------------------------------------------------

def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and a.value == 0.0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Const):
        if a.value == 0.0:
            return Const(0.0)
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return neg(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            return Const(0.0)
        if b.value == 1.0:
            return a
        if b.value == -1.0:
            return neg(a)
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and a.value == 0.0:
        return Const(0.0)
    return BinOp("/", a, b)


def powe(a: Expression, b: Expression) -> Expression:
    if isinstance(b, Const):
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return Const(1.0)
        if isinstance(a, Const):
            try:
                v = a.value ** b.value
            except (ValueError, OverflowError, ZeroDivisionError):
                return BinOp("^", a, b)
            if isinstance(v, complex) or not math.isfinite(v):
                return BinOp("^", a, b)
            return Const(v)
    return BinOp("^", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, BinOp) and a.op == "*" and isinstance(a.left, Const):
        return mul(Const(-a.left.value), a.right)
    return Neg(a)


_FOLDABLE = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
             "log": math.log, "sqrt": math.sqrt}


def call(fn: str, a: Expression) -> Expression:
    if fn not in KNOWN_FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function {fn!r}")
    if isinstance(a, Const):
        try:
            v = _FOLDABLE[fn](a.value)
        except (ValueError, OverflowError):
            return Call(fn, a)
        if math.isfinite(v):
            return Const(v)
    return Call(fn, a)


# --- parsing ------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad = n - len(stripped)
            raise ExpressionSyntaxError(
                f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, variables):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = None if variables is None else set(variables)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept_op(self, *ops):
        kind, value, _ = self.peek()
        if kind == "op" and value in ops:
            return self.advance()
        return None

    def parse(self) -> Expression:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {value!r}", pos)
        return e

    def expr(self) -> Expression:
        e = self.term()
        while True:
            tok = self.accept_op("+", "-")
            if tok is None:
                return e
            rhs = self.term()
            e = add(e, rhs) if tok[1] == "+" else sub(e, rhs)

    def term(self) -> Expression:
        e = self.unary()
        while True:
            tok = self.accept_op("*", "/")
            if tok is None:
                return e
            rhs = self.unary()
            e = mul(e, rhs) if tok[1] == "*" else div(e, rhs)

    def unary(self) -> Expression:
        if self.accept_op("-"):
            return neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.accept_op("^"):
            return powe(base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, value, pos = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if value == "pi":
                return Const(math.pi)
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                if value not in KNOWN_FUNCTIONS:
                    raise UnknownIdentifierError(
                        f"unknown function {value!r}", pos)
                self.advance()
                arg = self.expr()
                ckind, cvalue, cpos = self.advance()
                if not (ckind == "op" and cvalue == ")"):
                    raise ExpressionSyntaxError("expected ')'", cpos)
                return call(value, arg)
            if self.variables is not None and value not in self.variables:
                raise UnknownIdentifierError(
                    f"unknown variable {value!r}", pos)
            return Var(value)
        if kind == "op" and value == "(":
            e = self.expr()
            ckind, cvalue, cpos = self.advance()
            if not (ckind == "op" and cvalue == ")"):
                raise ExpressionSyntaxError("expected ')'", cpos)
            return e
        if kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", pos)
        raise ExpressionSyntaxError(f"unexpected {value!r}", pos)


def parse_expression(source: str, variables=None) -> Expression:
    """Parse ``source`` into an expression tree.

    When ``variables`` is given, any variable outside that collection raises
    :class:`UnknownIdentifierError`; otherwise variable names are accepted
    and validated later against the manifold's coordinates.
    """
    return _Parser(source, variables).parse()


# --- printing -----------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expression) -> int:
    if isinstance(e, BinOp):
        if e.op in "+-":
            return _PREC_ADD
        if e.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Const) and e.value < 0:
        return _PREC_NEG  # prints with a leading minus
    return _PREC_ATOM


def to_source(e: Expression) -> str:
    """Render a tree to a source string that reparses to the same tree."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if _prec(e.arg) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, BinOp):
        lp, rp = _prec(e.left), _prec(e.right)
        left, right = to_source(e.left), to_source(e.right)
        if e.op in "+-":
            if lp < _PREC_ADD:
                left = f"({left})"
            if rp <= _PREC_ADD:
                right = f"({right})"
            return f"{left} {e.op} {right}"
        if e.op in "*/":
            if lp < _PREC_MUL:
                left = f"({left})"
            if rp <= _PREC_MUL:
                right = f"({right})"
            return f"{left} {e.op} {right}"
        # power: base must be an atom, exponent a unary
        if lp < _PREC_ATOM:
            left = f"({left})"
        if rp < _PREC_NEG:
            right = f"({right})"
        return f"{left}^{right}"
    raise TypeError(f"not an expression node: {e!r}")


# --- evaluation ---------------------------------------------------------

def evaluate(e: Expression, env: dict):
    """Evaluate a tree with numpy semantics.

    ``env`` maps variable names to floats or arrays; broadcasting follows
    numpy rules.  Unknown variables raise :class:`EvaluationError`.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"variable {e.name!r} missing from "
                                  f"evaluation environment") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        a = evaluate(e.arg, env)
        with np.errstate(divide="ignore", invalid="ignore"):
            if e.fn == "sin":
                return np.sin(a)
            if e.fn == "cos":
                return np.cos(a)
            if e.fn == "exp":
                return np.exp(a)
            if e.fn == "log":
                return np.log(a)
            return np.sqrt(a)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        with np.errstate(divide="ignore", invalid="ignore"):
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                return a / b
            return np.power(a, b)
    raise TypeError(f"not an expression node: {e!r}")


# --- differentiation ----------------------------------------------------

def differentiate(e: Expression, name: str) -> Expression:
    """Exact partial derivative of ``e`` with respect to variable ``name``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0) if e.name == name else Const(0.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, name))
    if isinstance(e, Call):
        du = differentiate(e.arg, name)
        u = e.arg
        if e.fn == "sin":
            return mul(call("cos", u), du)
        if e.fn == "cos":
            return neg(mul(call("sin", u), du))
        if e.fn == "exp":
            return mul(call("exp", u), du)
        if e.fn == "log":
            return div(du, u)
        return div(du, mul(Const(2.0), call("sqrt", u)))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        du, dv = differentiate(u, name), differentiate(v, name)
        if e.op == "+":
            return add(du, dv)
        if e.op == "-":
            return sub(du, dv)
        if e.op == "*":
            return add(mul(du, v), mul(u, dv))
        if e.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), mul(v, v))
        # power
        if isinstance(v, Const):
            return mul(mul(v, powe(u, Const(v.value - 1.0))), du)
        # general u^v: u^v * (dv*log(u) + v*du/u)
        return mul(powe(u, v),
                   add(mul(dv, call("log", u)), div(mul(v, du), u)))
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expression) -> set[str]:
    """Names of all variables occurring in the tree."""
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, Call):
        return free_variables(e.arg)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    raise TypeError(f"not an expression node: {e!r}")
