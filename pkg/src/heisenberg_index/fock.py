"""Bargmann-Fock quantization of model operators on the graded space V^N.

Basis vectors are ``e_alpha = z^alpha / sqrt(alpha!)`` for ``|alpha| <= N``,
ordered by degree and then lexicographically (descending), tensored with
``C^r`` in fock-major order: row ``idx(alpha) * r + i``.  In this basis

    pi(Z_j)  e_alpha =  i sqrt(alpha_j + 1) e_{alpha + delta_j}
    pi(Zb_j) e_alpha = -i sqrt(alpha_j)     e_{alpha - delta_j}
    pi(T)            =  i/2

so ``pi(Z_j)`` and ``pi(Zb_j)`` are mutually adjoint ladder matrices.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .symbolic.algebra import EnvElement, OrderError, homogeneous_part, op_involution, principal_part
from .symbolic.parser import (
    Coef, Gen, Neg, Node, Num, OperatorExpr, Product, Sum, SzegoTerm, _contains, coefficient_value, to_env,
)

DEFAULT_EPS = 1e-8
DEFAULT_TOL = 1e-8


class DegenerateError(ValueError):
    """A model operator is not invertible (Rockland condition fails)."""

    def __init__(self, message: str, nodes=None):
        super().__init__(message)
        self.nodes = list(nodes) if nodes is not None else []


class TruncationError(ValueError):
    """Codomain too small to hold the image of the domain without truncation."""


# -- basis -----------------------------------------------------------------

def _degree_indices(n: int, k: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(k,)]
    out = []
    for first in range(k, -1, -1):
        out += [(first,) + rest for rest in _degree_indices(n - 1, k - first)]
    return out


@functools.lru_cache(maxsize=None)
def _basis_data(n: int, N: int):
    indices: list[tuple[int, ...]] = []
    offsets = [0]
    for k in range(N + 1):
        indices += _degree_indices(n, k)
        offsets.append(len(indices))
    return tuple(indices), tuple(offsets)


class FockBasis:
    """Graded basis of polynomials of degree <= N in n variables."""

    __slots__ = ("n", "N", "indices", "offsets", "_lookup")

    def __init__(self, n: int, N: int):
        if n < 1 or N < 0:
            raise ValueError(f"need n >= 1 and N >= 0, got n={n}, N={N}")
        self.n = n
        self.N = N
        self.indices, self.offsets = _basis_data(n, N)
        self._lookup = {a: i for i, a in enumerate(self.indices)}

    @property
    def dim(self) -> int:
        return len(self.indices)

    def block_dim(self, k: int) -> int:
        return math.comb(k + self.n - 1, self.n - 1)

    def block_slice(self, k: int, r: int = 1) -> slice:
        return slice(self.offsets[k] * r, self.offsets[k + 1] * r)

    def index(self, alpha) -> int:
        return self._lookup[tuple(alpha)]

    def degrees(self) -> np.ndarray:
        return np.array([sum(a) for a in self.indices])

    def __eq__(self, other) -> bool:
        return isinstance(other, FockBasis) and (self.n, self.N) == (other.n, other.N)

    def __hash__(self) -> int:
        return hash((self.n, self.N))

    def __repr__(self) -> str:
        return f"FockBasis(n={self.n}, N={self.N})"


# -- block matrices --------------------------------------------------------

@dataclass(frozen=True)
class BlockMatrix:
    """Dense matrix from ``domain (x) C^r`` to ``codomain (x) C^r``.

    ``data`` has shape ``batch + (codomain.dim * r, domain.dim * r)``.
    """

    data: np.ndarray
    domain: FockBasis
    codomain: FockBasis
    r: int = 1

    def __post_init__(self):
        expected = (self.codomain.dim * self.r, self.domain.dim * self.r)
        if self.data.shape[-2:] != expected:
            raise ValueError(f"data shape {self.data.shape} does not end with {expected}")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.data.shape[:-2]

    def block(self, k: int, l: int) -> np.ndarray:
        """Component mapping degree ``l`` of the domain to degree ``k`` of the codomain."""
        return self.data[..., self.codomain.block_slice(k, self.r), self.domain.block_slice(l, self.r)]

    @property
    def bandwidth(self) -> int:
        width = 0
        for k in range(self.codomain.N + 1):
            for l in range(self.domain.N + 1):
                if abs(k - l) > width and np.any(self.block(k, l)):
                    width = abs(k - l)
        return width

    def compress(self, N: int) -> BlockMatrix:
        """``e_N A e_N``: restrict domain and codomain to degrees <= N."""
        dom, cod = FockBasis(self.domain.n, min(N, self.domain.N)), FockBasis(self.codomain.n, min(N, self.codomain.N))
        return BlockMatrix(self.data[..., : cod.dim * self.r, : dom.dim * self.r], dom, cod, self.r)

    def __getitem__(self, index) -> BlockMatrix:
        return BlockMatrix(self.data[index], self.domain, self.codomain, self.r)

    def __matmul__(self, other: BlockMatrix) -> BlockMatrix:
        if self.domain != other.codomain or self.r != other.r:
            raise ValueError("incompatible block matrices")
        return BlockMatrix(self.data @ other.data, other.domain, self.codomain, self.r)


# -- quantization ----------------------------------------------------------

def _reach(P: EnvElement) -> int:
    """Largest degree shift ``|alpha| - |gamma|`` among the monomials of P."""
    return max((sum(a) - sum(g) for a, g, _ in P.terms), default=0)


@functools.lru_cache(maxsize=4096)
def _monomial_matrix(mono, n: int, dom_N: int, cod_N: int) -> np.ndarray:
    alpha, gamma, p = mono
    dom, cod = FockBasis(n, dom_N), FockBasis(n, cod_N)
    out = np.zeros((cod.dim, dom.dim), dtype=complex)
    scale = (1j) ** sum(alpha) * (-1j) ** sum(gamma) * (0.5j) ** p
    for col, beta in enumerate(dom.indices):
        if any(b < g for b, g in zip(beta, gamma)):
            continue
        amp = 1.0
        delta = []
        for b, g, a in zip(beta, gamma, alpha):
            d = b - g
            # a^g e_b then (a^+)^a on the result
            amp *= math.sqrt(math.factorial(b) / math.factorial(d) * math.factorial(d + a) / math.factorial(d))
            delta.append(d + a)
        if sum(delta) > cod_N:
            continue
        out[cod.index(delta), col] = scale * amp
    out.setflags(write=False)
    return out


def _kron(S: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Fock-major Kronecker product of a scalar matrix with (batched) r x r coefficients."""
    r = C.shape[-1]
    out = np.einsum("ab,...ij->...aibj", S, C)
    return out.reshape(C.shape[:-2] + (S.shape[0] * r, S.shape[1] * r))


def quantize(P: EnvElement, basis: FockBasis, codomain: FockBasis | None = None,
             *, truncate: bool = False) -> BlockMatrix:
    """Matrix of ``pi(P)`` from ``basis`` into ``codomain``.

    The default codomain has degree ``basis.N + order(P)`` and holds the
    whole image.  A smaller codomain raises :class:`TruncationError` unless
    ``truncate=True``, in which case the compression ``e_cod pi(P) e_dom``
    is returned.
    """
    if codomain is None:
        codomain = FockBasis(basis.n, basis.N + max(P.order, 0))
    if codomain.n != basis.n or basis.n != P.n:
        raise ValueError("basis, codomain and element must share n")
    if not truncate and codomain.N < basis.N + _reach(P):
        raise TruncationError(
            f"codomain degree {codomain.N} < {basis.N + _reach(P)} needed to hold the image"
        )
    r = P.r
    data = np.zeros(P.batch_shape + (codomain.dim * r, basis.dim * r), dtype=complex)
    for mono, coeff in P.terms.items():
        S = _monomial_matrix(mono, P.n, basis.N, codomain.N)
        data += _kron(S, coeff)
    return BlockMatrix(data, basis, codomain, r)


def block_spectra(P: EnvElement, N: int) -> list[np.ndarray]:
    """Sorted eigenvalues of each diagonal degree block of ``pi(P)`` for k <= N."""
    A = quantize(P, FockBasis(P.n, N), FockBasis(P.n, N), truncate=True)
    out = []
    for k in range(N + 1):
        ev = np.linalg.eigvals(A.block(k, k))
        out.append(ev[np.lexsort((ev.imag, ev.real))])
    return out


# -- model operators -------------------------------------------------------

Builder = Callable[[FockBasis, FockBasis], BlockMatrix]


def _twisted_product(X: np.ndarray, Y: np.ndarray, r: int) -> np.ndarray:
    """Product whose matrix factors multiply as X*Y but whose Fock factors compose as Y after X.

    This is how ``pi(op(A B))`` is assembled from ``pi(op A)`` and
    ``pi(op B)`` when op acts entrywise on matrix coefficients.
    """
    fb, fc = X.shape[-2] // r, X.shape[-1] // r
    fa = Y.shape[-2] // r
    Xr = X.reshape(X.shape[:-2] + (fb, r, fc, r))
    Yr = Y.reshape(Y.shape[:-2] + (fa, r, fb, r))
    Z = np.einsum("...bicj,...ajbk->...aick", Xr, Yr)
    return Z.reshape(Z.shape[:-4] + (fa * r, fc * r))


@dataclass(frozen=True)
class ModelOperator:
    """A model operator as the pair of builders for ``pi`` and ``pi o op``.

    Builders map ``(domain, codomain)`` to the exact compression
    ``e_codomain pi e_domain``.  ``tag`` is ``"enveloping"``, ``"szego"`` or
    ``"composite"``; ``payload`` holds the element or Szego symbol.
    """

    pi_builder: Builder
    pi_op_builder: Builder
    order: int
    n: int
    r: int
    tag: str
    payload: object = None
    batch_shape: tuple[int, ...] = ()
    reach: int = field(default=0, compare=False)

    @classmethod
    def from_env(cls, P: EnvElement) -> ModelOperator:
        P_op = op_involution(P)

        def pi(dom, cod):
            return quantize(P, dom, cod, truncate=True)

        def pi_op(dom, cod):
            return quantize(P_op, dom, cod, truncate=True)

        return cls(pi, pi_op, P.order, P.n, P.r, "enveloping", P, P.batch_shape,
                   max(_reach(P), _reach(P_op), 0))

    def pi(self, N: int) -> BlockMatrix:
        """Square compression ``e_N pi(P) e_N``."""
        b = FockBasis(self.n, N)
        return self.pi_builder(b, b)

    def pi_op(self, N: int) -> BlockMatrix:
        b = FockBasis(self.n, N)
        return self.pi_op_builder(b, b)

    def __add__(self, other: ModelOperator) -> ModelOperator:
        self._check(other)

        def pi(dom, cod):
            return BlockMatrix(self.pi_builder(dom, cod).data + other.pi_builder(dom, cod).data, dom, cod, self.r)

        def pi_op(dom, cod):
            return BlockMatrix(self.pi_op_builder(dom, cod).data + other.pi_op_builder(dom, cod).data,
                               dom, cod, self.r)

        return ModelOperator(pi, pi_op, max(self.order, other.order), self.n, self.r, "composite",
                             (self, other), _bshape(self, other), max(self.reach, other.reach))

    def __matmul__(self, other: ModelOperator) -> ModelOperator:
        """Composition ``self o other``."""
        self._check(other)
        first, second = other, self
        mid_shift = first.reach

        def pi(dom, cod):
            mid = FockBasis(self.n, dom.N + mid_shift)
            return second.pi_builder(mid, cod) @ first.pi_builder(dom, mid)

        def pi_op(dom, cod):
            # op(self*other) applies op(self) first on the Fock factor
            mid = FockBasis(self.n, dom.N + second.reach)
            X = second.pi_op_builder(dom, mid).data
            Y = first.pi_op_builder(mid, cod).data
            return BlockMatrix(_twisted_product(X, Y, self.r), dom, cod, self.r)

        return ModelOperator(pi, pi_op, self.order + other.order, self.n, self.r, "composite",
                             (self, other), _bshape(self, other), self.reach + other.reach)

    def _check(self, other: ModelOperator):
        if (self.n, self.r) != (other.n, other.r):
            raise ValueError("model operators act on different spaces")


def _bshape(a: ModelOperator, b: ModelOperator) -> tuple[int, ...]:
    return tuple(np.broadcast_shapes(a.batch_shape, b.batch_shape))


def _szego_data(a: np.ndarray, dom: FockBasis, cod: FockBasis) -> np.ndarray:
    r = a.shape[-1]
    m = min(dom.dim, cod.dim)
    eye = np.zeros((cod.dim, dom.dim), dtype=complex)
    eye[np.arange(m), np.arange(m)] = 1.0
    data = np.broadcast_to(np.kron(eye, np.eye(r)), a.shape[:-2] + (cod.dim * r, dom.dim * r)).copy()
    data[..., :r, :r] = a
    return data


def szego_model(a, basis: FockBasis | None = None, n: int | None = None) -> ModelOperator:
    """Model of ``S a S + (1 - S)``: ``pi = a (x) s + 1 (x) (1 - s)``, ``pi o op = 1``.

    ``s`` is the rank-one projection onto the vacuum block.  ``a`` is an r x r
    matrix (or a batch of them, or a scalar).  Singular ``a`` is accepted;
    invertibility is checked by :func:`rockland_check`.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2:
        a = a[..., None, None]
    if n is None:
        n = basis.n if basis is not None else 1
    r = a.shape[-1]

    def pi(dom, cod):
        return BlockMatrix(_szego_data(a, dom, cod), dom, cod, r)

    def pi_op(dom, cod):
        return BlockMatrix(_szego_data(np.broadcast_to(np.eye(r), a.shape), dom, cod), dom, cod, r)

    return ModelOperator(pi, pi_op, 0, n, r, "szego", a, a.shape[:-2], 0)


def _szego_from_expr(node: Node, n: int, r: int, values, decls) -> ModelOperator:
    val = to_env(node, n, r, values) if not isinstance(node, Coef) else coefficient_value(node.name, n, r, values, decls)
    if val.is_zero():
        coeff = np.zeros((r, r), dtype=complex)
    else:
        if val.order != 0:
            raise ValueError("Szego argument must be a coefficient")
        coeff = next(iter(val.terms.values()))
    return szego_model(coeff, n=n)


def node_order(node: Node) -> int:
    if isinstance(node, SzegoTerm) or isinstance(node, (Num, Coef)):
        return 0
    if isinstance(node, Gen):
        return 2 if node.kind == "T" else 1
    if isinstance(node, Neg):
        return node_order(node.arg)
    if isinstance(node, Sum):
        return max(node_order(t) for _, t in node.terms)
    if isinstance(node, Product):
        return sum(node_order(f) for f in node.factors)
    raise TypeError(f"unknown node {node!r}")


def model_from_expr(expr: OperatorExpr, n: int, r: int, values: Mapping[str, object],
                    order: int | None = None) -> ModelOperator:
    """Freeze coefficients and build the model operator of weight ``order``.

    Szego-free expressions are evaluated in the enveloping algebra and
    reduced to their principal part.  Expressions containing ``Szego(.)`` are
    assembled as composites whose principal part is taken factor by factor.
    """
    decls = expr.decls
    if not expr.has_szego:
        P = to_env(expr, n, r, values)
        d = P.order if order is None else order
        return ModelOperator.from_env(principal_part(P, d))
    d = node_order(expr.root) if order is None else order
    model = _principal_model(expr.root, d, n, r, values, decls)
    if model is None:
        return ModelOperator.from_env(EnvElement.zero(n, r))
    return model


def _principal_model(node: Node, d: int, n, r, values, decls) -> ModelOperator | None:
    """Weight-``d`` part of ``node`` as a model operator (None for zero)."""
    if not _contains(node, SzegoTerm):
        P = to_env(node, n, r, values)
        over = [m for m in P.terms if sum(m[0]) + sum(m[1]) + 2 * m[2] > d]
        if over:
            raise OrderError(f"expression has terms of weight > {d}")
        part = homogeneous_part(P, d)
        return None if part.is_zero() else ModelOperator.from_env(part)
    if isinstance(node, SzegoTerm):
        return _szego_from_expr(node.arg, n, r, values, decls) if d == 0 else None
    if isinstance(node, Neg):
        inner = _principal_model(node.arg, d, n, r, values, decls)
        if inner is None:
            return None
        return ModelOperator.from_env(EnvElement.scalar(-1.0, n, r)) @ inner
    if isinstance(node, Sum):
        out = None
        for sign, t in node.terms:
            part = _principal_model(t, d, n, r, values, decls)
            if part is None:
                continue
            if sign == "-":
                part = ModelOperator.from_env(EnvElement.scalar(-1.0, n, r)) @ part
            out = part if out is None else out + part
        return out
    if isinstance(node, Product):
        orders = [node_order(f) for f in node.factors]
        if sum(orders) > d:
            raise OrderError(f"product has weight {sum(orders)} > {d}")
        if sum(orders) < d:
            return None
        out = None
        for f, o in zip(node.factors, orders):
            part = _principal_model(f, o, n, r, values, decls)
            if part is None:
                return None
            out = part if out is None else out @ part
        return out
    raise TypeError(f"unknown node {node!r}")


# -- Rockland check --------------------------------------------------------

@dataclass
class RocklandReport:
    ladder: list[int]
    sigma_min_pi: list[float]
    sigma_min_pi_op: list[float]
    verdict: str  # "rockland" | "degenerate" | "inconclusive"
    witness_degree: int | None = None
    witness_side: str | None = None
    eps: float = DEFAULT_EPS

    def to_dict(self) -> dict:
        return {
            "ladder": self.ladder,
            "sigma_min_pi": self.sigma_min_pi,
            "sigma_min_pi_op": self.sigma_min_pi_op,
            "verdict": self.verdict,
            "witness_degree": self.witness_degree,
            "witness_side": self.witness_side,
            "eps": self.eps,
        }


def _min_singular(A: BlockMatrix):
    _, s, vh = np.linalg.svd(A.data)
    v = vh[-1].conj()
    basis, r = A.domain, A.r
    weights = [float(np.sum(np.abs(v[basis.block_slice(k, r)]) ** 2)) for k in range(basis.N + 1)]
    return float(s[-1]), int(np.argmax(weights))


def rockland_check(model: ModelOperator, N_max: int, eps: float = DEFAULT_EPS) -> RocklandReport:
    """Smallest singular values of ``e_N pi e_N`` and ``e_N pi^op e_N`` along a ladder of N.

    A near-kernel vector living in degrees <= N - order is a genuine
    witness (``degenerate``); one concentrated in the top bands may be a
    truncation artifact and only makes the verdict ``inconclusive``.
    """
    if model.batch_shape:
        raise ValueError("rockland_check takes a single model operator; index a family first")
    if N_max < 2 * model.order:
        raise ValueError(f"N_max={N_max} must be >= 2*order={2 * model.order}")
    ladder = list(range(model.order, N_max + 1, 2))
    smin, smin_op = [], []
    verdict, witness, side = "rockland", None, None
    for N in ladder:
        for name, A, store in (("pi", model.pi(N), smin), ("pi_op", model.pi_op(N), smin_op)):
            s, k = _min_singular(A)
            store.append(s)
            if s >= eps:
                continue
            if k <= N - model.order:
                if verdict != "degenerate":
                    verdict, witness, side = "degenerate", k, name
            elif verdict == "rockland":
                verdict, witness, side = "inconclusive", k, name
    return RocklandReport(ladder, smin, smin_op, verdict, witness, side, eps)


# -- the cocycle a(P) = pi(P) pi(P^op)^{-1} --------------------------------

@dataclass
class AResult:
    matrix: BlockMatrix
    residual: np.ndarray | float
    stable: np.ndarray | bool
    sigma_min: np.ndarray | float
    margin: int


def default_margin(order: int) -> int:
    return max(4, 2 * order)


def quotient(model: ModelOperator, N: int, margin: int):
    """``e_N A B^{-1} e_N`` with A, B the compressions of pi and pi^op to V^(N+margin).

    Returns ``(X, cond_A, cond_B)``; no invertibility check is made here.
    """
    M = N + margin
    A = model.pi(M).data
    B = model.pi_op(M).data
    sa = np.linalg.svd(A, compute_uv=False)
    sb = np.linalg.svd(B, compute_uv=False)
    tiny = np.finfo(float).tiny
    dim = FockBasis(model.n, N).dim * model.r
    with np.errstate(all="ignore"):
        cond_a = sa[..., 0] / np.maximum(sa[..., -1], tiny)
        cond_b = sb[..., 0] / np.maximum(sb[..., -1], tiny)
        try:
            # A B^{-1} = (B^T \ A^T)^T
            X = np.swapaxes(np.linalg.solve(np.swapaxes(B, -1, -2), np.swapaxes(A, -1, -2)), -1, -2)
        except np.linalg.LinAlgError:
            X = np.full(A.shape, np.nan, dtype=complex)
    return X[..., :dim, :dim], cond_a, cond_b


def _quotient(model: ModelOperator, N: int, margin: int, eps: float):
    X, cond_a, cond_b = quotient(model, N, margin)
    bad = ~((cond_b <= 1.0 / eps) & (cond_a <= 1.0 / eps))
    if np.any(bad):
        nodes = np.flatnonzero(bad).tolist() if np.ndim(bad) else []
        raise DegenerateError(
            f"model operator not invertible on V^{N + margin} (condition number above {1.0 / eps:g})", nodes
        )
    return X


def build_a(model: ModelOperator, N: int, margin: int | None = None, tol: float = DEFAULT_TOL,
            eps: float = DEFAULT_EPS) -> AResult:
    """``e_N pi(P) pi(P^op)^{-1} e_N`` computed on ``V^(N+margin)``.

    The residual is the operator-norm change when the margin grows by 2;
    ``stable`` records ``residual <= tol``.  Raises :class:`DegenerateError`
    if either compression is numerically singular.  Works on batched models
    (one result per batch entry).
    """
    if margin is None:
        margin = default_margin(model.order)
    if margin < 2 * model.order:
        raise ValueError(f"margin={margin} must be >= 2*order={2 * model.order}")
    X = _quotient(model, N, margin, eps)
    X2 = _quotient(model, N, margin + 2, eps)
    residual = np.linalg.norm(X - X2, ord=2, axis=(-2, -1))
    smin = np.linalg.svd(X, compute_uv=False)[..., -1]
    basis = FockBasis(model.n, N)
    stable = residual <= tol
    if not model.batch_shape:
        residual, stable, smin = float(residual), bool(stable), float(smin)
    return AResult(BlockMatrix(X, basis, basis, model.r), residual, stable, smin, margin)


@dataclass
class DecayProfile:
    diagonal: np.ndarray
    off_diagonal: dict[int, np.ndarray]


def block_decay_profile(A: BlockMatrix) -> DecayProfile:
    """Operator norms of the degree blocks of ``A - 1``.

    ``diagonal[k] = ||block_kk(A - 1)||``; ``off_diagonal[d][k]`` is the larger
    of ``||block(k, k+d)||`` and ``||block(k+d, k)||``.
    """
    if A.domain != A.codomain:
        raise ValueError("decay profile needs a square block matrix")
    N = A.domain.N
    diag = []
    for k in range(N + 1):
        blk = A.block(k, k)
        diag.append(np.linalg.norm(blk - np.eye(blk.shape[-1]), ord=2, axis=(-2, -1)))
    off: dict[int, np.ndarray] = {}
    for d in range(1, N + 1):
        vals = [np.maximum(np.linalg.norm(A.block(k, k + d), ord=2, axis=(-2, -1)),
                           np.linalg.norm(A.block(k + d, k), ord=2, axis=(-2, -1)))
                for k in range(N + 1 - d)]
        vals = np.array(vals)
        if np.any(vals):
            off[d] = vals
    return DecayProfile(np.array(diag), off)
