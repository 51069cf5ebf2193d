"""Normal-ordered polynomials in the Heisenberg generators Z_j, Zb_j, T.

Elements are finite sums of monomials ``Z^alpha Zb^gamma T^p`` with r x r
complex matrix coefficients.  The commutation rule is

    [Z_j, Zb_k] = 2i delta_jk T,      T central,

so that ``Zb_j Z_j = Z_j Zb_j - 2i T``.  With this normalization the
Bargmann-Fock assignment Z -> i z, Zb -> -i d/dz, T -> i/2 is a
representation (see :mod:`heisenberg_index.fock`).

Coefficient arrays may carry leading batch axes (shape ``batch + (r, r)``);
all operations broadcast over them.  This is how a family of model
operators frozen at many mesh nodes is stored as a single element.
"""

from __future__ import annotations

import itertools
import math
from types import MappingProxyType
from typing import Iterable, Mapping, Union

import numpy as np

Monomial = tuple[tuple[int, ...], tuple[int, ...], int]
Scalar = Union[int, float, complex, np.number]

# [Zb_j, Z_j] = Zb Z - Z Zb = -2i T
_CONTRACTION = -2j


class DimensionError(ValueError):
    """Operands live in different algebras (n or r disagree)."""


class OrderError(ValueError):
    """An element has terms of Heisenberg weight above the declared order."""


def monomial_weight(mono: Monomial) -> int:
    alpha, gamma, p = mono
    return sum(alpha) + sum(gamma) + 2 * p


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


class EnvElement:
    """Immutable element of U(h_n) tensored with r x r matrices.

    ``terms`` maps normal-ordered monomials ``(alpha, gamma, p)`` to
    coefficient arrays of shape ``batch_shape + (r, r)``.  Monomials whose
    coefficient is identically zero are dropped on construction.
    """

    __slots__ = ("n", "r", "batch_shape", "_terms")

    def __init__(self, n: int, r: int, terms: Mapping[Monomial, np.ndarray] | None = None,
                 batch_shape: tuple[int, ...] = ()):
        if n < 1 or r < 1:
            raise DimensionError(f"need n >= 1 and r >= 1, got n={n}, r={r}")
        self.n = n
        self.r = r
        shape = tuple(batch_shape)
        clean: dict[Monomial, np.ndarray] = {}
        for mono, coeff in (terms or {}).items():
            alpha, gamma, p = mono
            if len(alpha) != n or len(gamma) != n:
                raise DimensionError(f"monomial {mono} does not have n={n} indices")
            if min(alpha + gamma + (p,)) < 0:
                raise ValueError(f"negative exponent in {mono}")
            c = np.asarray(coeff, dtype=complex)
            if c.shape[-2:] != (r, r):
                raise DimensionError(f"coefficient shape {c.shape} is not (..., {r}, {r})")
            shape = np.broadcast_shapes(shape, c.shape[:-2])
            if not np.any(c):
                continue
            key = (tuple(int(a) for a in alpha), tuple(int(g) for g in gamma), int(p))
            clean[key] = c
        self.batch_shape = tuple(shape)
        self._terms = MappingProxyType(
            {m: _freeze(np.broadcast_to(c, self.batch_shape + (r, r))) for m, c in clean.items()}
        )

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, n: int, r: int = 1) -> EnvElement:
        return cls(n, r)

    @classmethod
    def scalar(cls, value, n: int, r: int = 1) -> EnvElement:
        """Constant element; ``value`` is a number, an r x r matrix, or a batch of either."""
        return cls(n, r, {((0,) * n, (0,) * n, 0): _as_matrix(value, r)})

    @classmethod
    def identity(cls, n: int, r: int = 1) -> EnvElement:
        return cls.scalar(1.0, n, r)

    @classmethod
    def generator(cls, kind: str, j: int | None, n: int, r: int = 1) -> EnvElement:
        """``kind`` is ``"Z"``, ``"Zb"`` or ``"T"``; ``j`` is 1-based."""
        zero = (0,) * n
        if kind == "T":
            mono = (zero, zero, 1)
        else:
            if j is None or not 1 <= j <= n:
                raise DimensionError(f"generator index {j} out of range 1..{n}")
            e = tuple(1 if i == j - 1 else 0 for i in range(n))
            if kind == "Z":
                mono = (e, zero, 0)
            elif kind == "Zb":
                mono = (zero, e, 0)
            else:
                raise ValueError(f"unknown generator kind {kind!r}")
        return cls(n, r, {mono: np.eye(r)})

    # -- basic accessors --------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, np.ndarray]:
        return self._terms

    @property
    def order(self) -> int:
        """Heisenberg order: the largest monomial weight (0 for the zero element)."""
        return max((monomial_weight(m) for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __getitem__(self, index) -> EnvElement:
        """Select batch entries, e.g. ``family[node]``."""
        if not self.batch_shape:
            raise IndexError("element has no batch axes")
        terms = {m: c[index] for m, c in self._terms.items()}
        probe = np.empty(self.batch_shape, dtype=bool)[index]
        return EnvElement(self.n, self.r, terms, batch_shape=np.shape(probe))

    def _check_compatible(self, other: EnvElement) -> None:
        if self.n != other.n or self.r != other.r:
            raise DimensionError(
                f"incompatible elements: (n={self.n}, r={self.r}) vs (n={other.n}, r={other.r})"
            )

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check_compatible(other)
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms[m] + c if m in terms else c
        return EnvElement(self.n, self.r, terms)

    __radd__ = __add__

    def __neg__(self) -> EnvElement:
        return EnvElement(self.n, self.r, {m: -c for m, c in self._terms.items()}, self.batch_shape)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return multiply(self, other)

    def __rmul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return multiply(other, self)

    def _coerce(self, other):
        if isinstance(other, EnvElement):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return EnvElement.scalar(other, self.n, self.r)
        return NotImplemented

    def scale(self, factor) -> EnvElement:
        """Multiply every coefficient by a scalar (or a batch of scalars)."""
        f = np.asarray(factor, dtype=complex)[..., None, None]
        return EnvElement(self.n, self.r, {m: c * f for m, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnvElement):
            return NotImplemented
        if (self.n, self.r) != (other.n, other.r) or set(self._terms) != set(other._terms):
            return False
        return all(np.array_equal(c, other._terms[m]) for m, c in self._terms.items())

    __hash__ = None  # type: ignore[assignment]

    def allclose(self, other: EnvElement, atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        for m in set(self._terms) | set(other._terms):
            a = self._terms.get(m, 0.0)
            b = other._terms.get(m, 0.0)
            if not np.allclose(a, b, rtol=0.0, atol=atol):
                return False
        return True

    def map_coefficients(self, fn) -> EnvElement:
        return EnvElement(self.n, self.r, {m: fn(c) for m, c in self._terms.items()})

    def transpose_coefficients(self) -> EnvElement:
        return self.map_coefficients(lambda c: np.swapaxes(c, -1, -2))

    # -- display ----------------------------------------------------------

    def __repr__(self) -> str:
        return f"EnvElement(n={self.n}, r={self.r}, {to_source(self)!r})"

    def __str__(self) -> str:
        return to_source(self)


def _as_matrix(value, r: int) -> np.ndarray:
    v = np.asarray(value, dtype=complex)
    if v.ndim >= 2 and v.shape[-2:] == (r, r):
        return v
    # scalar or batch of scalars
    return v[..., None, None] * np.eye(r)


def _monomial_product(left: Monomial, right: Monomial) -> list[tuple[Monomial, complex]]:
    """Normal-order ``Z^a Zb^g T^p * Z^a' Zb^g' T^p'``.

    Per direction j, ``Zb^g Z^a = sum_k k! C(g,k) C(a,k) (-2iT)^k Z^(a-k) Zb^(g-k)``.
    """
    a1, g1, p1 = left
    a2, g2, p2 = right
    ranges = [range(min(g, a) + 1) for g, a in zip(g1, a2)]
    out = []
    for ks in itertools.product(*ranges):
        coeff = 1
        for g, a, k in zip(g1, a2, ks):
            coeff *= math.factorial(k) * math.comb(g, k) * math.comb(a, k)
        total = sum(ks)
        alpha = tuple(x + y - k for x, y, k in zip(a1, a2, ks))
        gamma = tuple(x - k + y for x, y, k in zip(g1, g2, ks))
        out.append(((alpha, gamma, p1 + p2 + total), coeff * _CONTRACTION ** total))
    return out


def multiply(P: EnvElement, Q: EnvElement) -> EnvElement:
    """Normal-ordered product ``P * Q``; coefficient matrices multiply as ``C_P @ C_Q``."""
    P._check_compatible(Q)
    terms: dict[Monomial, np.ndarray] = {}
    for m1, c1 in P.terms.items():
        for m2, c2 in Q.terms.items():
            cc = c1 @ c2
            for mono, k in _monomial_product(m1, m2):
                add = k * cc
                terms[mono] = terms[mono] + add if mono in terms else add
    return EnvElement(P.n, P.r, terms)


def _reversed_word(alpha, gamma, p, coeff, n, r, zbar_first: bool) -> EnvElement:
    zero = (0,) * n
    eye = np.eye(r)
    zpart = EnvElement(n, r, {(tuple(alpha), zero, 0): eye})
    zbpart = EnvElement(n, r, {(zero, tuple(gamma), 0): eye})
    word = multiply(zbpart, zpart) if zbar_first else multiply(zpart, zbpart)
    tail = EnvElement(n, r, {(zero, zero, p): coeff})
    return multiply(word, tail)


def op_involution(P: EnvElement) -> EnvElement:
    """Image under the anti-automorphism induced by (v, t) -> (v, -t).

    Generators map Z -> Z, Zb -> Zb, T -> -T and words are reversed, so
    ``Z^a Zb^g T^p`` becomes ``(-1)^p Zb^g Z^a T^p`` (then normal-ordered).
    Coefficient matrices are carried over entrywise; for matrix coefficients
    ``op(P*Q)`` equals ``op(Q)*op(P)`` with coefficient products reversed.
    """
    out = EnvElement.zero(P.n, P.r)
    for (alpha, gamma, p), c in P.terms.items():
        out = out + _reversed_word(alpha, gamma, p, (-1) ** p * c, P.n, P.r, zbar_first=True)
    return out


def formal_adjoint(P: EnvElement) -> EnvElement:
    """Antilinear anti-involution Z <-> Zb, T -> -T, coefficients conjugate-transposed.

    The adjoint of ``Z^a Zb^g T^p`` is ``(-T)^p Z^g Zb^a``, already normal-ordered.
    """
    terms = {}
    for (alpha, gamma, p), c in P.terms.items():
        terms[(gamma, alpha, p)] = (-1) ** p * np.conj(np.swapaxes(c, -1, -2))
    return EnvElement(P.n, P.r, terms)


def dilate(P: EnvElement, s: float) -> EnvElement:
    """Apply the parabolic dilation: a monomial of weight w is scaled by s**w."""
    if not s > 0:
        raise ValueError(f"dilation parameter must be positive, got {s}")
    return EnvElement(P.n, P.r, {m: c * s ** monomial_weight(m) for m, c in P.terms.items()})


def homogeneous_part(P: EnvElement, w: int) -> EnvElement:
    return EnvElement(P.n, P.r, {m: c for m, c in P.terms.items() if monomial_weight(m) == w})


def principal_part(P: EnvElement, d: int) -> EnvElement:
    """Weight-exactly-``d`` part of ``P``; raises :class:`OrderError` if ``P`` has order > d."""
    over = [m for m in P.terms if monomial_weight(m) > d]
    if over:
        raise OrderError(f"element has terms of weight > {d}: {sorted(over)}")
    return homogeneous_part(P, d)


def sum_elements(items: Iterable[EnvElement], n: int, r: int) -> EnvElement:
    out = EnvElement.zero(n, r)
    for item in items:
        out = out + item
    return out


# -- printing --------------------------------------------------------------

def _real_text(x: float) -> str:
    x = float(x)
    return str(int(x)) if x == int(x) and abs(x) < 1e16 else repr(x)


def _format_number(z: complex) -> str:
    z = complex(z)
    re_, im = z.real, z.imag
    if im == 0:
        return _real_text(re_)
    mag = _real_text(abs(im))
    imag = "i" if mag == "1" else f"{mag}*i"
    if re_ == 0:
        return ("-" if im < 0 else "") + imag
    return f"({_real_text(re_)} {'-' if im < 0 else '+'} {imag})"


def _monomial_source(mono: Monomial) -> list[str]:
    alpha, gamma, p = mono
    factors = []
    for j, a in enumerate(alpha, start=1):
        factors += [f"Z{j}"] * a
    for j, g in enumerate(gamma, start=1):
        factors += [f"Zb{j}"] * g
    factors += ["T"] * p
    return factors


def monomial_sort_key(mono: Monomial):
    alpha, gamma, p = mono
    return (-monomial_weight(mono), tuple(-a for a in alpha), tuple(-g for g in gamma), -p)


def to_source(P: EnvElement) -> str:
    """Canonical normal-ordered text, re-parseable for scalar coefficients.

    Terms are listed by decreasing weight; matrix coefficients print as
    bracketed literals.
    """
    if P.is_zero():
        return "0"
    if P.batch_shape:
        return f"<batched element over {P.batch_shape}>"
    parts = []
    for mono in sorted(P.terms, key=monomial_sort_key):
        c = P.terms[mono]
        factors = _monomial_source(mono)
        if P.r == 1:
            num = _format_number(c[0, 0])
            if factors and num in ("1", "-1"):
                body = "*".join(factors)
                parts.append(("-" if num == "-1" else "+", body))
                continue
            sign = "+"
            if num.startswith("-"):
                sign, num = "-", num[1:]
            parts.append((sign, "*".join([num] + factors)))
        else:
            rows = ", ".join("[" + ", ".join(_format_number(x) for x in row) + "]" for row in c)
            parts.append(("+", "*".join([f"[{rows}]"] + factors)))
    head_sign, head = parts[0]
    text = ("-" if head_sign == "-" else "") + head
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text
