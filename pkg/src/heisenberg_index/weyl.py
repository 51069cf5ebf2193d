"""Polynomial Weyl symbols on V*_+ and their sharp (Moyal) product.

For polynomials the product is the finite expansion

    f # g = sum_k (1/k!) (i/2)^k  Pi^k(f, g),
    Pi(f, g) = sum_{a,b} Theta[a, b] d_a f d_b g,    Theta = omega^{-1},

normalized so that ``1 # f = f``.  The principal Weyl symbol of a symbol is
its radial limit on the sphere S^{2n-1}; for a polynomial this is the
top-degree homogeneous part restricted to the unit sphere.
"""

from __future__ import annotations

import itertools
import math
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

Exponent = tuple[int, ...]


def standard_omega(n: int) -> np.ndarray:
    """Block matrix [[0, I], [-I, 0]] on R^{2n} (coordinates x_1..x_n, y_1..y_n)."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


class WeylPoly:
    """Polynomial in 2n real variables with complex coefficients."""

    __slots__ = ("n", "omega", "_coeffs", "_theta")

    def __init__(self, n: int, coeffs: Mapping[Exponent, complex] | None = None,
                 omega: np.ndarray | None = None):
        self.n = n
        om = standard_omega(n) if omega is None else np.asarray(omega, dtype=float)
        if om.shape != (2 * n, 2 * n) or not np.allclose(om, -om.T):
            raise ValueError("omega must be an antisymmetric 2n x 2n matrix")
        if abs(np.linalg.det(om)) < 1e-14:
            raise ValueError("omega must be invertible")
        om = om.copy()
        om.setflags(write=False)
        self.omega = om
        theta = np.linalg.inv(om)
        theta.setflags(write=False)
        self._theta = theta
        clean = {}
        for e, c in (coeffs or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != 2 * n or min(e, default=0) < 0:
                raise ValueError(f"bad exponent {e} for n={n}")
            if c != 0:
                clean[e] = clean.get(e, 0) + complex(c)
        self._coeffs = MappingProxyType({e: c for e, c in clean.items() if c != 0})

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, c, n: int, omega=None) -> WeylPoly:
        return cls(n, {(0,) * (2 * n): c}, omega)

    @classmethod
    def variable(cls, a: int, n: int, omega=None) -> WeylPoly:
        """The coordinate function xi_a (0-based)."""
        e = [0] * (2 * n)
        e[a] = 1
        return cls(n, {tuple(e): 1.0}, omega)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, degree: int, omega=None) -> WeylPoly:
        coeffs = {}
        for e in _exponents(2 * n, degree):
            coeffs[e] = complex(rng.normal(), rng.normal())
        return cls(n, coeffs, omega)

    # -- structure ------------------------------------------------------------

    @property
    def coeffs(self) -> Mapping[Exponent, complex]:
        return self._coeffs

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self._coeffs), default=0)

    def top_part(self) -> WeylPoly:
        d = self.degree
        return self._like({e: c for e, c in self._coeffs.items() if sum(e) == d})

    def _like(self, coeffs) -> WeylPoly:
        return WeylPoly(self.n, coeffs, self.omega)

    def _check(self, other: WeylPoly) -> None:
        if self.n != other.n or not np.array_equal(self.omega, other.omega):
            raise ValueError("symbols live on different symplectic spaces")

    def derivative(self, a: int) -> WeylPoly:
        out = {}
        for e, c in self._coeffs.items():
            if e[a]:
                e2 = list(e)
                e2[a] -= 1
                out[tuple(e2)] = c * e[a]
        return self._like(out)

    def __add__(self, other: WeylPoly) -> WeylPoly:
        self._check(other)
        out = dict(self._coeffs)
        for e, c in other._coeffs.items():
            out[e] = out.get(e, 0) + c
        return self._like(out)

    def __neg__(self) -> WeylPoly:
        return self._like({e: -c for e, c in self._coeffs.items()})

    def __sub__(self, other: WeylPoly) -> WeylPoly:
        return self + (-other)

    def scale(self, s) -> WeylPoly:
        return self._like({e: s * c for e, c in self._coeffs.items()})

    def __mul__(self, other: WeylPoly) -> WeylPoly:
        """Pointwise (commutative) product."""
        self._check(other)
        out: dict[Exponent, complex] = {}
        for e1, c1 in self._coeffs.items():
            for e2, c2 in other._coeffs.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return self._like(out)

    def max_abs_diff(self, other: WeylPoly) -> float:
        keys = set(self._coeffs) | set(other._coeffs)
        return max((abs(self._coeffs.get(e, 0) - other._coeffs.get(e, 0)) for e in keys), default=0.0)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for e, c in self._coeffs.items():
            out += c * np.prod(pts ** np.array(e), axis=-1)
        return out

    def __repr__(self) -> str:
        return f"WeylPoly(n={self.n}, {dict(self._coeffs)!r})"


def _exponents(nvars: int, degree: int):
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), total):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            yield tuple(e)


def poisson_power(f: WeylPoly, g: WeylPoly, k: int) -> WeylPoly:
    """``Pi^k(f, g) = sum Theta[a1,b1]..Theta[ak,bk] d_{a1..ak} f d_{b1..bk} g``."""
    f._check(g)
    if k == 0:
        return f * g
    theta = f._theta
    out = WeylPoly(f.n, {}, f.omega)
    pairs = [(a, b) for a in range(2 * f.n) for b in range(2 * f.n) if theta[a, b] != 0]
    for a, b in pairs:
        fa, gb = f.derivative(a), g.derivative(b)
        if fa.coeffs and gb.coeffs:
            out = out + poisson_power(fa, gb, k - 1).scale(theta[a, b])
    return out


def sharp(f: WeylPoly, g: WeylPoly) -> WeylPoly:
    """Moyal product of two polynomial symbols (the series terminates)."""
    f._check(g)
    out = WeylPoly(f.n, {}, f.omega)
    for k in range(min(f.degree, g.degree) + 1):
        out = out + poisson_power(f, g, k).scale((0.5j) ** k / math.factorial(k))
    return out


def moyal_associativity_check(f: WeylPoly, g: WeylPoly, h: WeylPoly, tol: float = 1e-12) -> bool:
    lhs = sharp(sharp(f, g), h)
    rhs = sharp(f, sharp(g, h))
    return lhs.max_abs_diff(rhs) <= tol


# -- principal symbols -------------------------------------------------------

def sphere_grid(n: int, m: int = 16) -> np.ndarray:
    """Deterministic points on S^{2n-1} from a hyperspherical-angle product grid."""
    d = 2 * n
    polar = [(np.arange(m) + 0.5) * np.pi / m for _ in range(d - 2)]
    azimuth = np.arange(2 * m) * np.pi / m
    pts = []
    for angles in itertools.product(*polar, azimuth):
        x = np.empty(d)
        s = 1.0
        for i, t in enumerate(angles[:-1]):
            x[i] = s * math.cos(t)
            s *= math.sin(t)
        x[d - 2] = s * math.cos(angles[-1])
        x[d - 1] = s * math.sin(angles[-1])
        pts.append(x)
    return np.array(pts)


def principal_weyl(f, n: int | None = None, points: np.ndarray | None = None,
                   radius: float = 1e6) -> tuple[np.ndarray, np.ndarray]:
    """Principal Weyl symbol sampled on the sphere; returns ``(points, values)``.

    ``f`` is either a :class:`WeylPoly` (its top-degree part is evaluated on
    the unit sphere, i.e. normalized by ``|xi|^deg``) or a callable symbol
    on V*_+ that extends continuously to the radial boundary, evaluated at
    ``radius * points``.
    """
    if isinstance(f, WeylPoly):
        n = f.n
    if n is None:
        raise ValueError("n is required for callable symbols")
    pts = sphere_grid(n) if points is None else np.asarray(points, dtype=float)
    if isinstance(f, WeylPoly):
        return pts, f.top_part()(pts)
    return pts, np.asarray(f(radius * pts), dtype=complex)


def restrict_plus(khat: Callable, tau: float = 1.0) -> Callable:
    """Restriction ``xi -> khat(xi, tau)`` of a symbol on V* x R to the hyperplane tau = 1."""
    return lambda xi: khat(xi, tau)


def restrict_op(khat: Callable) -> Callable:
    """Restriction of ``khat^op(xi, tau) = khat(xi, -tau)`` to tau = 1."""
    return restrict_plus(khat, -1.0)
