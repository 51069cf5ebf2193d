"""Text syntax for model operators.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := 'i' | number | ident | gen | '(' expr ')' | 'Szego' '(' expr ')'
    gen    := ('Z' | 'Zb') index | 'T'

A leading unary minus is also accepted.  Identifiers resolve against a
declaration table mapping names to ``"scalar"`` or a matrix size.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .algebra import DimensionError, EnvElement


class ParseError(ValueError):
    """Syntax or declaration error; ``pos`` is the 0-based offset into the source."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Coef:
    name: str


@dataclass(frozen=True)
class Gen:
    kind: str  # "Z", "Zb" or "T"
    index: int | None = None


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Sum:
    # first term always carries '+'
    terms: tuple[tuple[str, "Node"], ...]


@dataclass(frozen=True)
class Product:
    factors: tuple["Node", ...]


@dataclass(frozen=True)
class SzegoTerm:
    """``Szego(a)`` stands for ``S a S + (1 - S)`` with S the Szego projector."""
    arg: "Node"


Node = Union[Num, Coef, Gen, Neg, Sum, Product, SzegoTerm]


@dataclass(frozen=True)
class OperatorExpr:
    root: Node
    decls: Mapping[str, int] = field(default_factory=dict)  # 0 = scalar, else matrix size
    n: int | None = None

    @property
    def r(self) -> int:
        sizes = {self.decls[name] for name in coefficient_names(self.root)} - {0}
        return sizes.pop() if sizes else 1

    @property
    def has_szego(self) -> bool:
        return _contains(self.root, SzegoTerm)

    def __str__(self) -> str:
        return format_expr(self.root)


def coefficient_names(node: Node) -> set[str]:
    if isinstance(node, Coef):
        return {node.name}
    return set().union(*(coefficient_names(c) for c in _children(node)))


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Neg, SzegoTerm)):
        return (node.arg,)
    if isinstance(node, Sum):
        return tuple(t for _, t in node.terms)
    if isinstance(node, Product):
        return node.factors
    return ()


def _contains(node: Node, kind) -> bool:
    return isinstance(node, kind) or any(_contains(c, kind) for c in _children(node))


# -- declarations ----------------------------------------------------------

_MATRIX_DECL = re.compile(r"matrix\s*\(\s*(\d+)\s*\)$")


def normalize_decl(spec) -> int:
    """Accepts ``"scalar"``, ``"matrix(r)"``, ``("matrix", r)`` or an int (0 = scalar)."""
    if isinstance(spec, int) and not isinstance(spec, bool):
        if spec < 0:
            raise ParseError(f"bad declaration {spec!r}")
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        if s == "scalar":
            return 0
        m = _MATRIX_DECL.match(s)
        if m:
            return int(m.group(1))
    if isinstance(spec, (tuple, list)) and len(spec) == 2 and spec[0] == "matrix":
        return int(spec[1])
    raise ParseError(f"bad declaration {spec!r}")


# -- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*()]))"
)
_GEN = re.compile(r"(Zb|Z)(\d+)$")


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            stripped = len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[pos + stripped]!r}", pos + stripped)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, decls: Mapping[str, int], n: int | None):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.decls = decls
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        terms = []
        sign = "+"
        if self.peek()[1] == "-":
            self.take()
            first = self.term()
            terms.append(("+", Neg(first)))
        else:
            terms.append(("+", self.term()))
        while self.peek()[1] in ("+", "-"):
            sign = self.take()[1]
            terms.append((sign, self.term()))
        return terms[0][1] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Node:
        factors = [self.factor()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(complex(float(text)))
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if text == "i":
                return Num(1j)
            if text == "T":
                return Gen("T")
            if text == "Szego":
                self.expect("(")
                start = self.peek()[2]
                arg = self.expr()
                self.expect(")")
                if _contains(arg, Gen) or _contains(arg, SzegoTerm):
                    raise ParseError("Szego argument must be a coefficient expression", start)
                return SzegoTerm(arg)
            m = _GEN.match(text)
            if m:
                j = int(m.group(2))
                if j < 1 or (self.n is not None and j > self.n):
                    raise ParseError(f"generator {text} out of range for n={self.n}", pos)
                return Gen(m.group(1), j)
            if text not in self.decls:
                raise ParseError(f"undeclared coefficient {text!r}", pos)
            return Coef(text)
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse_operator(src: str, decls: Mapping[str, object] | None = None,
                   n: int | None = None) -> OperatorExpr:
    """Parse operator text into an :class:`OperatorExpr`.

    Raises :class:`ParseError` on syntax errors, undeclared names, generator
    indices above ``n``, or matrix coefficients of differing sizes.
    """
    table = {name: normalize_decl(spec) for name, spec in (decls or {}).items()}
    root = _Parser(src, table, n).parse()
    sizes = {table[name] for name in coefficient_names(root)} - {0}
    if len(sizes) > 1:
        raise ParseError(f"matrix coefficients of different sizes {sorted(sizes)}")
    return OperatorExpr(root, table, n)


# -- printing ----------------------------------------------------------------

def _num_text(z: complex) -> str:
    if z == 1j:
        return "i"
    if z.imag == 0 and z.real >= 0:
        return repr(float(z.real))
    return f"({z.real!r} + {z.imag!r}*i)"


def format_expr(node: Node) -> str:
    """Canonical text for an AST; parsing it back yields an equal AST."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Coef):
        return node.name
    if isinstance(node, Gen):
        return "T" if node.kind == "T" else f"{node.kind}{node.index}"
    if isinstance(node, SzegoTerm):
        return f"Szego({format_expr(node.arg)})"
    if isinstance(node, Neg):
        return f"-{_wrap(node.arg, (Sum, Neg))}"
    if isinstance(node, Product):
        return "*".join(_wrap(f, (Sum, Neg)) for f in node.factors)
    if isinstance(node, Sum):
        first = node.terms[0][1]
        out = format_expr(first) if isinstance(first, Neg) else _wrap(first, Sum)
        for sign, t in node.terms[1:]:
            out += f" {sign} {_wrap(t, (Sum, Neg))}"
        return out
    raise TypeError(f"unknown node {node!r}")


def _wrap(node: Node, kinds) -> str:
    text = format_expr(node)
    return f"({text})" if kinds and isinstance(node, kinds) else text


# -- evaluation into the enveloping algebra --------------------------------

def to_env(expr: OperatorExpr | Node, n: int, r: int, values: Mapping[str, object]) -> EnvElement:
    """Evaluate a Szego-free expression with concrete coefficient values.

    ``values[name]`` is a number or r x r matrix, optionally with leading
    batch axes (one entry per mesh node).
    """
    root = expr.root if isinstance(expr, OperatorExpr) else expr
    decls = expr.decls if isinstance(expr, OperatorExpr) else {}
    return _eval(root, n, r, values, decls)


def coefficient_value(name: str, n: int, r: int, values, decls) -> EnvElement:
    if name not in values:
        raise KeyError(f"coefficient {name!r} has no value")
    v = np.asarray(values[name], dtype=complex)
    if decls.get(name, 0) == 0:
        if v.ndim >= 2 and v.shape[-2:] == (r, r) and r > 1:
            raise DimensionError(f"coefficient {name!r} is declared scalar but got a matrix")
        return EnvElement.scalar(v, n, r)
    if v.shape[-2:] != (r, r):
        raise DimensionError(f"coefficient {name!r} should be {r}x{r}, got shape {v.shape}")
    return EnvElement(n, r, {((0,) * n, (0,) * n, 0): v})


def _eval(node: Node, n: int, r: int, values, decls) -> EnvElement:
    if isinstance(node, Num):
        return EnvElement.scalar(node.value, n, r)
    if isinstance(node, Coef):
        return coefficient_value(node.name, n, r, values, decls)
    if isinstance(node, Gen):
        return EnvElement.generator(node.kind, node.index, n, r)
    if isinstance(node, Neg):
        return -_eval(node.arg, n, r, values, decls)
    if isinstance(node, Sum):
        out = EnvElement.zero(n, r)
        for sign, t in node.terms:
            v = _eval(t, n, r, values, decls)
            out = out + v if sign == "+" else out - v
        return out
    if isinstance(node, Product):
        out = _eval(node.factors[0], n, r, values, decls)
        for f in node.factors[1:]:
            out = out * _eval(f, n, r, values, decls)
        return out
    if isinstance(node, SzegoTerm):
        raise TypeError("Szego terms are not elements of the enveloping algebra")
    raise TypeError(f"unknown node {node!r}")
