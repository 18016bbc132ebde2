"""Small arithmetic expression language for coefficient functions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' ['-'] primary)*
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

All binary operators associate to the left, including ``^``. Evaluation works
on Python floats and on numpy arrays alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {"abs": 1, "exp": 1, "sqrt": 1, "tanh": 1, "min": None, "max": None}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class UnboundVariableError(KeyError):
    pass


class ExprDomainError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Const, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, offset = self.take()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", offset)

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.primary()
        while self.peek()[:2] == ("op", "^"):
            self.take()
            if self.peek()[:2] == ("op", "-"):
                self.take()
                node = BinOp("^", node, Neg(self.primary()))
            else:
                node = BinOp("^", node, self.primary())
        return node

    def primary(self):
        kind, value, offset = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise UnknownIdentifierError(value, offset)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[value]
                if arity is not None and len(args) != arity:
                    raise ExprSyntaxError(f"{value} takes {arity} argument(s)", offset)
                if arity is None and len(args) < 2:
                    raise ExprSyntaxError(f"{value} takes at least 2 arguments", offset)
                return Call(value, tuple(args))
            if self.variables is not None and value not in self.variables:
                raise UnknownIdentifierError(value, offset)
            return Var(value)
        if (kind, value) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {found}", offset)


def parse_expr(source: str, variables=None) -> Expr:
    """Parse ``source`` into an expression tree.

    If ``variables`` is given, any identifier outside it is rejected.
    Offsets in syntax errors are character offsets into ``source``.
    """
    return _Parser(source, None if variables is None else frozenset(variables)).parse()


def to_source(e: Expr) -> str:
    """Print a tree so that ``parse_expr(to_source(e)) == e``."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        if e.op == "^" and isinstance(e.right, Neg):
            return f"({to_source(e.left)} ^ -{_atom(e.right.operand)})"
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def _atom(e: Expr) -> str:
    s = to_source(e)
    if isinstance(e, (Const, Var, Call)) or s.startswith("("):
        return s
    return f"({s})"


def free_variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    return frozenset().union(*(free_variables(a) for a in e.args))


def _check(value, what):
    if np.any(~np.isfinite(value)):
        raise ExprDomainError(what)
    return value


def eval_expr(e: Expr, bindings: Mapping[str, object]):
    """Evaluate ``e``. Bindings may be floats or broadcastable numpy arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -eval_expr(e.operand, bindings)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, bindings)
        b = eval_expr(e.right, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise ExprDomainError("division by zero")
            return a / b
        with np.errstate(all="ignore"):
            if np.ndim(a) == 0 and np.ndim(b) == 0:
                try:
                    out = math.pow(a, b)
                except (ValueError, ZeroDivisionError, OverflowError):
                    raise ExprDomainError(f"{a!r} ^ {b!r} is undefined") from None
            else:
                out = np.power(np.asarray(a, dtype=float), b)
        return _check(out, "power is undefined or overflows")
    args = [eval_expr(a, bindings) for a in e.args]
    f = e.func
    if f == "abs":
        return abs(args[0]) if np.ndim(args[0]) == 0 else np.abs(args[0])
    if f == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise ExprDomainError("sqrt of a negative number")
        return math.sqrt(args[0]) if np.ndim(args[0]) == 0 else np.sqrt(args[0])
    if f == "exp":
        with np.errstate(over="ignore"):
            out = np.exp(args[0])
        return float(_check(out, "exp overflows")) if np.ndim(out) == 0 else out
    if f == "tanh":
        return math.tanh(args[0]) if np.ndim(args[0]) == 0 else np.tanh(args[0])
    if f == "min":
        out = args[0]
        for a in args[1:]:
            out = min(out, a) if np.ndim(out) == 0 and np.ndim(a) == 0 else np.minimum(out, a)
        return out
    if f == "max":
        out = args[0]
        for a in args[1:]:
            out = max(out, a) if np.ndim(out) == 0 and np.ndim(a) == 0 else np.maximum(out, a)
        return out
    raise ValueError(f"unknown function {f!r}")


def eval_on(e: Expr, bindings: Mapping[str, object], shape) -> np.ndarray:
    """Evaluate and broadcast to a float array of the given shape."""
    out = np.broadcast_to(np.asarray(eval_expr(e, bindings), dtype=float), shape)
    return np.array(out)
