"""Recursive-descent parser for closed-form scalar expressions.

Grammar (whitespace is ignored between tokens)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' atom | atom ('^' atom)?
    atom   := number | name | '(' expr ')' | func '(' expr ')'

``func`` is one of exp, log, sin, cos, sinh, cosh, sqrt, re, im, conj.
``i`` is the imaginary unit and ``pi`` is the constant 3.14159...; neither
may be declared as a variable.  A leading minus applies to a single atom and
may not be followed by ``^``: ``-y^2`` is rejected, write ``-(y^2)`` or
``(-y)^2``.  Numbers are decimals with an optional exponent.

``re``, ``im`` and ``conj`` act coefficientwise on jets, which is correct
when the declared variables are real coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from . import jets
from .jets import DomainError, Jet

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt", "re", "im",
             "conj")
CONSTANTS = {"i": 1j, "pi": math.pi}


class ExprSyntaxError(ValueError):
    """Malformed expression; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset
        self.source = source


class UndeclaredVariableError(ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"undeclared variable {name!r} at byte offset {offset}")
        self.name = name
        self.offset = offset


class ExprDomainError(DomainError):
    """Evaluation hit a singular input; ``node`` is the offending subtree."""

    def __init__(self, node: "Node", reason: str):
        super().__init__(f"{reason} in {pretty(node)}")
        self.node = node


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expr:
    """A parsed expression together with its declared variable list."""

    root: Node
    variables: tuple

    def __str__(self) -> str:
        return pretty(self.root)

    def __call__(self, **values):
        return evaluate(self, values)


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(source: str) -> list:
    raw = source.encode("utf-8")
    toks, pos = [], 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            off = len(source[:pos].encode("utf-8"))
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}",
                                  off, source)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), len(source[:pos].encode("utf-8"))))
        pos = m.end()
    toks.append(("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.vars = set(variables)
        self.toks = _tokenize(source)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text: str):
        t = self.take()
        if t[1] != text:
            found = "end of input" if t[0] == "end" else repr(t[1])
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t[2],
                                  self.source)

    def parse(self) -> Node:
        node = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"unexpected token {t[1]!r}", t[2],
                                  self.source)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            arg = self.atom()
            t = self.peek()
            if t[1] == "^":
                raise ExprSyntaxError(
                    "ambiguous unary minus before '^' (parenthesize)", t[2],
                    self.source)
            return Neg(arg)
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            node = BinOp("^", node, self.atom())
        return node

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(complex(float(text)))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in CONSTANTS:
                return Const(text)
            if text not in self.vars:
                raise UndeclaredVariableError(text, off)
            return Var(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off, self.source)


def parse_expr(source: str, variables: Sequence[str]) -> Expr:
    """Parse ``source`` with the given declared variable names."""
    variables = tuple(variables)
    for v in variables:
        if v in FUNCTIONS or v in CONSTANTS:
            raise ValueError(f"reserved name cannot be a variable: {v!r}")
    return Expr(_Parser(source, variables).parse(), variables)


def _fmt_num(z: complex) -> str:
    if z.imag == 0:
        return repr(float(z.real))
    if z.real == 0:
        return f"({float(z.imag)!r}*i)"
    return f"({float(z.real)!r}+{float(z.imag)!r}*i)"


def pretty(node) -> str:
    """Fully parenthesized rendering that re-parses to the same tree."""
    if isinstance(node, Expr):
        return pretty(node.root)
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        return f"(-({pretty(node.arg)}))"
    if isinstance(node, BinOp):
        return f"(({pretty(node.left)}){node.op}({pretty(node.right)}))"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    raise TypeError(node)


# evaluation --------------------------------------------------------------

def _is_zero(v) -> bool:
    if isinstance(v, Jet):
        v = v.value
    return bool(np.any(np.asarray(v) == 0))


def _int_exponent(node) -> int | None:
    if isinstance(node, Num) and node.value.imag == 0 \
            and float(node.value.real).is_integer():
        return int(node.value.real)
    if isinstance(node, Neg):
        k = _int_exponent(node.arg)
        return None if k is None else -k
    return None


_PLAIN = {
    "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
    "sinh": np.sinh, "cosh": np.cosh, "sqrt": np.sqrt,
}
_JET = {
    "exp": jets.exp, "log": jets.log, "sin": jets.sin, "cos": jets.cos,
    "sinh": jets.sinh, "cosh": jets.cosh, "sqrt": jets.sqrt,
}


def _eval(node, env: Mapping):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        x = _eval(node.arg, env)
        f = node.func
        if f in ("log", "sqrt") and _is_zero(x):
            raise ExprDomainError(node, f"{f} at zero")
        if f == "re":
            return x.real if isinstance(x, Jet) else np.real(x) + 0j
        if f == "im":
            return x.imag if isinstance(x, Jet) else np.imag(x) + 0j
        if f == "conj":
            return x.conj() if isinstance(x, Jet) else np.conj(x)
        if isinstance(x, Jet):
            return _JET[f](x)
        return _PLAIN[f](np.asarray(x, dtype=complex))
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        if node.op == "^":
            k = _int_exponent(node.right)
            if k is not None:
                if k < 0 and _is_zero(left):
                    raise ExprDomainError(node, "negative power of zero")
                if isinstance(left, Jet):
                    return jets.ipow(left, k)
                return np.asarray(left, dtype=complex) ** k
            right = _eval(node.right, env)
            if _is_zero(left):
                raise ExprDomainError(node, "non-integer power of zero")
            if isinstance(left, Jet) or isinstance(right, Jet):
                if isinstance(right, Jet):
                    return jets.exp(right * jets.log(left))
                p = complex(right)
                return jets.rpow(left, p.real if p.imag == 0 else p)
            return np.asarray(left, dtype=complex) ** right
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return right * left if isinstance(right, Jet) else left * right
        if node.op == "/":
            if _is_zero(right):
                raise ExprDomainError(node, "division by zero")
            if isinstance(right, Jet):
                return jets.reciprocal(right) * left
            return left / np.asarray(right, dtype=complex)
    raise TypeError(node)


def evaluate(e: Expr, values: Mapping):
    """Evaluate with plain numbers/arrays or jets bound to the variables."""
    missing = [v for v in e.variables if v not in values]
    if missing:
        raise KeyError(f"unassigned variables: {missing}")
    out = _eval(e.root, values)
    if not isinstance(out, Jet):
        out = np.asarray(out, dtype=complex)
        if out.ndim == 0:
            return complex(out)
    return out


def jet_eval(e: Expr, point: Mapping, order: int = 2) -> Jet:
    """Jet of ``e`` at ``point`` in all declared variables.

    The result is a :class:`Jet` over ``len(e.variables)`` variables in the
    declared order; ``order`` may be 0 to 3.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError("jet order must be 0, 1, 2 or 3")
    missing = [v for v in e.variables if v not in point]
    if missing:
        raise KeyError(f"unassigned variables: {missing}")
    seeds = Jet.seeds([point[v] for v in e.variables], order)
    env = dict(zip(e.variables, seeds))
    out = _eval(e.root, env)
    if not isinstance(out, Jet):
        out = Jet.constant(seeds[0].space if seeds else jets.jet_space(0, order),
                           out)
    return out


def compile_expr(source: str, variables: Sequence[str]):
    """Parse once and return a callable taking positional values or jets."""
    e = parse_expr(source, variables)

    def fn(*args):
        return evaluate(e, dict(zip(e.variables, args)))

    fn.expr = e
    return fn


__all__ = ["Expr", "ExprSyntaxError", "UndeclaredVariableError",
           "ExprDomainError", "parse_expr", "pretty", "evaluate", "jet_eval",
           "compile_expr"]
