"""A small arithmetic expression language.

Grammar (precedence climbing), lowest to highest binding::

    level  operators   associativity
    1      + -         left
    2      * /         left
    3      unary -, +  prefix
    4      ^           right

Atoms are numbers (``2``, ``0.5``, ``1e-3``), variables (caller-defined,
``x``, ``y``, ``t`` by default), the constants ``e``, ``pi`` and ``i``,
calls ``exp(..)``, ``sin(..)``, ``cos(..)`` and parenthesised
expressions. So ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.
Errors carry the 1-based column of the offending character.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "log": np.log}
PUBLIC_FUNCTIONS = ("exp", "sin", "cos")
CONSTANTS = {"e": math.e, "pi": math.pi, "i": 1j}
BINARY = {"+": (1, "left"), "-": (1, "left"), "*": (2, "left"), "/": (2, "left"), "^": (4, "right")}
UNARY_PREC = 3

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, lparen, rparen, end
    text: str
    col: int


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _NUMBER.match(text, pos)
        if m and (ch.isdigit() or ch == "."):
            tokens.append(Token("num", m.group(0), pos + 1))
            pos = m.end()
            continue
        m = _NAME.match(text, pos)
        if m:
            tokens.append(Token("name", m.group(0), pos + 1))
            pos = m.end()
            continue
        if ch in BINARY:
            tokens.append(Token("op", ch, pos + 1))
        elif ch == "(":
            tokens.append(Token("lparen", ch, pos + 1))
        elif ch == ")":
            tokens.append(Token("rparen", ch, pos + 1))
        else:
            raise ExpressionError(f"unexpected character {ch!r}", pos + 1)
        pos += 1
    tokens.append(Token("end", "", len(text) + 1))
    return tokens


# -- AST -----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: complex
    col: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    col: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    arg: object
    col: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    col: int = 0


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object
    col: int = 0


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = set(variables)
        self.tokens = tokenize(text)
        self.i = 0
        self.open_parens = []

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def parse(self):
        if self.tok.kind == "end":
            raise ExpressionError("empty expression", self.tok.col)
        node = self.expr(1)
        if self.tok.kind == "rparen":
            raise ExpressionError("unbalanced parenthesis: unexpected ')'", self.tok.col)
        if self.tok.kind != "end":
            raise ExpressionError(f"unexpected {self.tok.text!r}", self.tok.col)
        return node

    def expr(self, min_prec):
        lhs = self.unary()
        while self.tok.kind == "op" and BINARY[self.tok.text][0] >= min_prec:
            op = self.advance()
            prec, assoc = BINARY[op.text]
            rhs = self.expr(prec + 1 if assoc == "left" else prec)
            lhs = Binary(op.text, lhs, rhs, op.col)
        return lhs

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            arg = self.expr(UNARY_PREC)
            return arg if op.text == "+" else Unary("-", arg, op.col)
        return self.atom()

    def _closing(self, opener):
        if self.tok.kind != "rparen":
            if self.tok.kind == "end":
                raise ExpressionError("unbalanced parenthesis: '(' is never closed", opener.col)
            raise ExpressionError(f"expected ')' but found {self.tok.text!r}", self.tok.col)
        self.advance()

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), t.col)
        if t.kind == "lparen":
            self.advance()
            inner = self.expr(1)
            self._closing(t)
            return inner
        if t.kind == "name":
            self.advance()
            if t.text in PUBLIC_FUNCTIONS:
                if self.tok.kind != "lparen":
                    raise ExpressionError(f"function {t.text} needs an argument in parentheses", self.tok.col)
                opener = self.advance()
                arg = self.expr(1)
                self._closing(opener)
                return Call(t.text, arg, t.col)
            if t.text in self.variables:
                return Var(t.text, t.col)
            if t.text in CONSTANTS:
                return Num(CONSTANTS[t.text], t.col)
            raise ExpressionError(f"unknown name {t.text!r}", t.col)
        if t.kind == "end":
            raise ExpressionError("missing operand", t.col)
        raise ExpressionError(f"unexpected {t.text!r}", t.col)


def parse(text, variables=("x", "y", "t")):
    return _Parser(text, variables).parse()


def evaluate(node, env):
    if isinstance(node, Num):
        v = node.value
        return v.real if isinstance(v, complex) and v.imag == 0 else v
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](evaluate(node.arg, env))
    a, b = evaluate(node.left, env), evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


def depends_on(node, name):
    if isinstance(node, Var):
        return node.name == name
    if isinstance(node, Num):
        return False
    if isinstance(node, (Unary, Call)):
        return depends_on(node.arg, name)
    return depends_on(node.left, name) or depends_on(node.right, name)


def _is_zero(n):
    return isinstance(n, Num) and n.value == 0


def _is_one(n):
    return isinstance(n, Num) and n.value == 1


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Binary("+", a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Unary("-", b)
    return Binary("-", a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return Num(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return Binary("*", a, b)


def differentiate(node, name):
    """Symbolic derivative of an AST with respect to variable ``name``."""
    if not depends_on(node, name):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Unary):
        d = differentiate(node.arg, name)
        return Unary("-", d)
    if isinstance(node, Call):
        du = differentiate(node.arg, name)
        u = node.arg
        if node.fn == "exp":
            outer = node
        elif node.fn == "sin":
            outer = Call("cos", u)
        elif node.fn == "cos":
            outer = Unary("-", Call("sin", u))
        else:
            outer = Binary("/", Num(1.0), u)
        return _mul(outer, du)
    u, v = node.left, node.right
    du, dv = differentiate(u, name), differentiate(v, name)
    if node.op == "+":
        return _add(du, dv)
    if node.op == "-":
        return _sub(du, dv)
    if node.op == "*":
        return _add(_mul(du, v), _mul(u, dv))
    if node.op == "/":
        return Binary("/", _sub(_mul(du, v), _mul(u, dv)), Binary("*", v, v))
    # power
    if not depends_on(v, name):
        return _mul(_mul(v, Binary("^", u, Binary("-", v, Num(1.0)))), du)
    # u^v (v' log u + v u'/u)
    return _mul(node, _add(_mul(dv, Call("log", u)), Binary("/", _mul(v, du), u)))


class Expression:
    """Parsed expression, callable with keyword variables.

    Examples
    --------
    >>> Expression("x^2 + 1")(x=2.0)
    5.0
    """

    def __init__(self, text, variables=("x", "y", "t"), _ast=None):
        self.text = text
        self.variables = tuple(variables)
        self.ast = parse(text, variables) if _ast is None else _ast

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __call__(self, **env):
        missing = [v for v in self.variables if depends_on(self.ast, v) and v not in env]
        if missing:
            raise ExpressionError(f"no value for variable {missing[0]!r}", 1)
        with np.errstate(all="ignore"):
            return evaluate(self.ast, env)

    def depends_on(self, name):
        return depends_on(self.ast, name)

    def derivative(self, name):
        return Expression(f"d({self.text})/d{name}", self.variables, differentiate(self.ast, name))

    def of(self, name):
        """One-variable callable ``f(values)`` broadcasting constants to the input shape."""

        def fn(values):
            values = np.asarray(values)
            out = self(**{name: values})
            return np.broadcast_to(out, values.shape) if np.ndim(out) == 0 else out

        return fn


def parse_list(text, variables=("x", "y", "t")):
    """Comma-separated expressions; columns are reported relative to ``text``."""
    out = []
    start = 0
    depth = 0

    def add(piece, start):
        try:
            out.append(Expression(piece.strip(), variables))
        except ExpressionError as exc:
            lead = len(piece) - len(piece.lstrip())
            raise ExpressionError(str(exc).rsplit(" (column", 1)[0], start + lead + exc.column) from None

    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth <= 0:
            add(text[start:pos], start)
            start = pos + 1
    # the tail is parsed even with open parentheses so the error surfaces
    add(text[start:], start)
    return out
