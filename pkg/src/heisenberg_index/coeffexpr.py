"""Closed-form coefficient fields in chart coordinates.

Grammar::

    field  := matrix | expr
    matrix := '[' row (',' row)* ']'      row := '[' expr (',' expr)* ']'
    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | atom
    atom   := number | 'i' | 'pi' | coordinate | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp'

Coordinates are ``phi1, phi2, phi3`` on the torus and ``eta, phi1, phi2``
on the sphere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import Mesh
from .symbolic.parser import ParseError

COORDINATES = {"phi1", "phi2", "phi3", "eta"}
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/(),\[\]]))"
)

Env = dict  # coordinate name -> ndarray
Fn = Callable[[Env], np.ndarray]


@dataclass(frozen=True)
class CoeffExpr:
    """Compiled coefficient field; ``size`` is 0 for scalars, else the matrix size."""

    source: str
    size: int
    coordinates: frozenset
    _entries: tuple  # tuple of rows of compiled scalar functions (1x1 for scalars)

    def check_mesh(self, mesh: Mesh) -> None:
        missing = sorted(self.coordinates - set(mesh.axes))
        if missing:
            raise ParseError(f"coordinate(s) {missing} undefined on {mesh.kind}")

    def evaluate(self, mesh: Mesh) -> np.ndarray:
        """Values at every node: ``mesh.shape`` or ``mesh.shape + (r, r)``."""
        self.check_mesh(mesh)
        env = dict(zip(mesh.axes, mesh.coords))
        return self._eval(env, mesh.shape)

    def constant(self):
        """Value of a coordinate-free field (number or r x r matrix)."""
        if self.coordinates:
            raise ParseError(f"field {self.source!r} depends on coordinates {sorted(self.coordinates)}")
        return self._eval({}, ())

    def _eval(self, env, shape) -> np.ndarray:
        rows = [[np.broadcast_to(np.asarray(f(env), dtype=complex), shape) for f in row] for row in self._entries]
        if self.size == 0:
            return np.array(rows[0][0])
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = []
        pos = 0
        while pos < len(src):
            if src[pos:].strip() == "":
                break
            m = _TOKEN.match(src, pos)
            if not m:
                off = pos + len(src[pos:]) - len(src[pos:].lstrip())
                raise ParseError(f"unexpected character {src[off]!r}", off)
            self.tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
            pos = m.end()
        self.tokens.append(("end", "", len(src)))
        self.i = 0
        self.coords: set[str] = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text:
            raise ParseError(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok[2])

    def field(self):
        if self.peek()[1] == "[":
            rows = self.matrix()
        else:
            rows = [[self.expr()]]
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return rows

    def matrix(self):
        self.expect("[")
        rows = [self.row()]
        while self.peek()[1] == ",":
            self.take()
            rows.append(self.row())
        self.expect("]")
        width = {len(r) for r in rows}
        if width != {len(rows)}:
            raise ParseError(f"matrix literal must be square, got {len(rows)} rows of widths {sorted(width)}")
        return rows

    def row(self):
        self.expect("[")
        entries = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            entries.append(self.expr())
        self.expect("]")
        return entries

    def expr(self) -> Fn:
        left = self.term()
        while self.peek()[1] in "+-" and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = _binary(op, left, right)
        return left

    def term(self) -> Fn:
        left = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            right = self.unary()
            left = _binary(op, left, right)
        return left

    def unary(self) -> Fn:
        if self.peek()[1] in ("-", "+") and self.peek()[0] == "op":
            op = self.take()[1]
            inner = self.unary()
            return (lambda env: -inner(env)) if op == "-" else inner
        return self.atom()

    def atom(self) -> Fn:
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            return lambda env: value
        if text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "ident":
            if text == "i":
                return lambda env: 1j
            if text == "pi":
                return lambda env: math.pi
            if text in FUNCTIONS:
                fn = FUNCTIONS[text]
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return lambda env: fn(inner(env))
            if text in COORDINATES:
                self.coords.add(text)
                return lambda env: env[text]
            raise ParseError(f"unknown name {text!r}", pos)
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def _binary(op: str, left: Fn, right: Fn) -> Fn:
    if op == "+":
        return lambda env: left(env) + right(env)
    if op == "-":
        return lambda env: left(env) - right(env)
    if op == "*":
        return lambda env: left(env) * right(env)
    return lambda env: left(env) / right(env)


def parse_coeff_expr(src: str, mesh: Mesh | None = None) -> CoeffExpr:
    """Compile a coefficient field; with ``mesh`` given, coordinates are checked against it."""
    p = _Parser(src)
    rows = p.field()
    size = 0 if len(rows) == 1 and not src.lstrip().startswith("[") else len(rows)
    out = CoeffExpr(src, size, frozenset(p.coords), tuple(tuple(r) for r in rows))
    if mesh is not None:
        out.check_mesh(mesh)
    return out
