"""Coefficient expressions.

A small recursive-descent parser for scalar fields written in the grammar

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := number | ident | func '(' expr ')' | '(' expr ')' | '-' factor

Expressions evaluate vectorised over numpy arrays and can be differentiated
symbolically, which the recovery harness uses for exact chain-rule gradients.
``frac`` is treated as having derivative 1 and ``step`` derivative 0, i.e.
derivatives hold away from the jump sets.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DivisionByZero, ExprSyntaxError, UnknownIdentifier

COEFF_VARIABLES = ("x1", "x2", "y1", "y2", "z1", "z2", "t")
COEFF_FUNCTIONS = ("sin", "cos", "exp", "frac", "step")
CHART_VARIABLES = ("u", "v")
CHART_FUNCTIONS = ("sin", "cos", "exp", "sqrt")
CONSTANTS = {"pi": np.pi}

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/()]))")


def _step(a):
    return np.where(a >= 0.0, 1.0, 0.0)


def _frac(a):
    return a - np.floor(a)


_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
          "frac": _frac, "step": _step}


# --- AST -------------------------------------------------------------------

class Node:
    """Base AST node."""

    def eval(self, env):
        raise NotImplementedError

    def diff(self, var: str) -> "Node":
        raise NotImplementedError

    def free(self) -> frozenset:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return ZERO

    def free(self):
        return frozenset()

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Node):
    name: str

    def eval(self, env):
        return env[self.name]

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def free(self):
        return frozenset((self.name,))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return _neg(self.arg.diff(var))

    def free(self):
        return self.arg.free()

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise DivisionByZero(f"division by zero in {self}")
        return a / b

    def diff(self, var):
        da, db = self.left.diff(var), self.right.diff(var)
        if self.op == "+":
            return _add(da, db)
        if self.op == "-":
            return _sub(da, db)
        if self.op == "*":
            return _add(_mul(da, self.right), _mul(self.left, db))
        num = _sub(_mul(da, self.right), _mul(self.left, db))
        return _div(num, _mul(self.right, self.right))

    def free(self):
        return self.left.free() | self.right.free()

    def __str__(self):
        return f"({self.left}{self.op}{self.right})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def eval(self, env):
        return _FUNCS[self.func](self.arg.eval(env))

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO or self.func == "step":
            return ZERO
        f = self.func
        if f == "sin":
            outer = Call("cos", self.arg)
        elif f == "cos":
            outer = Neg(Call("sin", self.arg))
        elif f == "exp":
            outer = self
        elif f == "sqrt":
            outer = _div(Num(0.5), self)
        else:  # frac, derivative one off the integers
            outer = ONE
        return _mul(outer, da)

    def free(self):
        return self.arg.free()

    def __str__(self):
        return f"{self.func}({self.arg})"


ZERO = Num(0.0)
ONE = Num(1.0)


# light simplification keeps derivative trees small
def _neg(a):
    if a == ZERO:
        return ZERO
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def _div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Bin("/", a, b)


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, text, variables, functions):
        self.text = text
        self.variables = set(variables)
        self.functions = set(functions)
        self.tokens = self._lex(text)
        self.i = 0

    def _lex(self, text):
        toks = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                start = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(text, start,
                                      {"number", "identifier", "operator"})
            kind = m.lastgroup
            start = m.start(kind)
            toks.append((kind, m.group(kind), start))
            pos = m.end()
        toks.append(("end", "", len(text)))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.peek()
        if val != value or kind != "op":
            raise ExprSyntaxError(self.text, pos, {repr(value)})
        self.i += 1

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(self.text, pos, {"'+'", "'-'", "'*'", "'/'",
                                                   "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Bin(op, node, self.factor())
        return node

    def factor(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if val in self.functions:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in self.variables:
                return Var(val)
            if val in CONSTANTS:
                return Num(float(CONSTANTS[val]))
            raise UnknownIdentifier(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and val == "-":
            return Neg(self.factor())
        raise ExprSyntaxError(self.text, pos,
                              {"number", "identifier", "'('", "'-'"})


class CoeffExpr:
    """Parsed scalar field.

    Parameters
    ----------
    text : str
        Source text.
    variables, functions : iterable of str
        Allowed identifiers.
    """

    def __init__(self, text: str, variables: Iterable[str] = COEFF_VARIABLES,
                 functions: Iterable[str] = COEFF_FUNCTIONS, *, _node=None):
        self.text = str(text)
        self.variables = tuple(variables)
        self.functions = tuple(functions)
        self.node = _node if _node is not None else _Parser(
            self.text, self.variables, self.functions).parse()
        self._dcache: dict[str, CoeffExpr] = {}

    @property
    def free_variables(self) -> frozenset:
        return self.node.free()

    def depends_on(self, *names: str) -> bool:
        return bool(self.free_variables & set(names))

    @property
    def is_constant(self) -> bool:
        return not self.free_variables

    def __call__(self, env: Mapping[str, object] | None = None, **kw):
        """Evaluate; missing variables default to 0.

        The result always has the broadcast shape of the supplied arrays.
        """
        env = dict(env or {}, **kw)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) \
            if env else ()
        full = {name: env.get(name, 0.0) for name in self.variables}
        out = np.asarray(self.node.eval(full), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    def diff(self, var: str) -> "CoeffExpr":
        """Symbolic partial derivative."""
        if var not in self._dcache:
            self._dcache[var] = CoeffExpr(self.text, self.variables,
                                          self.functions,
                                          _node=self.node.diff(var))
        return self._dcache[var]

    def __repr__(self):
        return f"CoeffExpr({self.text!r})"

    def __str__(self):
        return self.text


def parse_coeff(text, variables=COEFF_VARIABLES, functions=COEFF_FUNCTIONS):
    """Parse ``text`` into a :class:`CoeffExpr` (numbers pass through)."""
    if isinstance(text, CoeffExpr):
        return text
    if isinstance(text, (int, float)):
        text = repr(float(text))
    return CoeffExpr(text, variables, functions)


def parse_chart(text):
    """Parse a chart component in the parameters ``u, v``."""
    return CoeffExpr(text, CHART_VARIABLES, CHART_FUNCTIONS)
