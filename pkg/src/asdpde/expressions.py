"""Tiny expression language for coefficient fields.

Grammar::

    expr   := term { ("+"|"-") term }
    term   := factor { ("*"|"/") factor }
    factor := base [ "^" number ]
    base   := number | "x" | "y" | "(" expr ")" | func "(" expr ")" | "-" base
    func   := "sin" | "cos" | "exp" | "abs"

Expressions evaluate vectorized over numpy arrays.  Evaluation is
deterministic and pure; parsed trees are immutable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExpressionError",
    "EvaluationError",
    "Expression",
    "parse_field_expression",
]

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
}


class ExpressionError(ValueError):
    """Syntax error; carries the byte offset of the offending token."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EvaluationError(ValueError):
    """Runtime evaluation failure (bad identifier, division by zero)."""


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class _Num:
    value: float

    def eval(self, env):
        return self.value

    def pretty(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class _Var:
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(
                f"variable {self.name!r} is not defined in this context"
            ) from None

    def pretty(self) -> str:
        return self.name


@dataclass(frozen=True)
class _Neg:
    arg: object

    def eval(self, env):
        return -self.arg.eval(env)

    def pretty(self) -> str:
        return f"(-{self.arg.pretty()})"


@dataclass(frozen=True)
class _Func:
    name: str
    arg: object

    def eval(self, env):
        return _FUNCS[self.name](self.arg.eval(env))

    def pretty(self) -> str:
        return f"{self.name}({self.arg.pretty()})"


@dataclass(frozen=True)
class _BinOp:
    op: str
    left: object
    right: object

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        # division: report the first offending node index, if any
        barr = np.atleast_1d(np.asarray(b, dtype=float))
        bad = np.flatnonzero(barr == 0.0)
        if bad.size:
            if np.asarray(b).ndim:
                raise EvaluationError(
                    f"division by zero at node index {int(bad[0])}"
                )
            raise EvaluationError("division by zero")
        return a / b

    def pretty(self) -> str:
        return f"({self.left.pretty()} {self.op} {self.right.pretty()})"


@dataclass(frozen=True)
class _Pow:
    base: object
    exponent: float

    def eval(self, env):
        return self.base.eval(env) ** self.exponent

    def pretty(self) -> str:
        return f"({self.base.pretty()} ^ {self.exponent!r})"


@dataclass(frozen=True)
class Expression:
    """A parsed coefficient-field expression."""

    root: object
    text: str

    def __call__(self, x, y=None):
        env = {"x": np.asarray(x, dtype=float)}
        if y is not None:
            env["y"] = np.asarray(y, dtype=float)
        out = np.asarray(self.root.eval(env), dtype=float)
        out = np.broadcast_to(out, np.shape(env["x"])).copy() if out.shape != np.shape(env["x"]) else out
        if not np.all(np.isfinite(out)):
            bad = int(np.where(~np.isfinite(np.atleast_1d(out)))[0][0])
            raise EvaluationError(f"non-finite value at node index {bad}")
        return out

    def pretty(self) -> str:
        return self.root.pretty()


# --- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionError(
                f"unexpected character {stripped[0]!r}",
                len(text) - len(stripped),
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, found {val!r}", off)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExpressionError(f"trailing input {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = _BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = _BinOp(val, node, self.factor())
            else:
                return node

    def factor(self):
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, off = self.advance()
            if kind != "num":
                raise ExpressionError("exponent must be a number literal", off)
            node = _Pow(node, float(val))
        return node

    def base(self):
        kind, val, off = self.advance()
        if kind == "num":
            return _Num(float(val))
        if kind == "name":
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return _Func(val, arg)
            if val in ("x", "y"):
                return _Var(val)
            raise ExpressionError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "op" and val == "-":
            return _Neg(self.base())
        raise ExpressionError(f"unexpected token {val!r}", off)


def parse_field_expression(text: str) -> Expression:
    """Parse ``text`` into an immutable :class:`Expression`."""
    return Expression(root=_Parser(text).parse(), text=text)
