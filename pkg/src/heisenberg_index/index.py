"""K^1-cocycles of model-operator families and the odd-Chern-character index integral.

Pipeline: freeze an operator expression at every mesh node, build
``a(P)_m = e_N pi(P_m) pi(P_m^op)^{-1} e_N`` node by node, form

    ch1 = (1/2 pi i) tr(a^{-1} da),
    ch3 = (1/24 pi^2) tr((a^{-1} da)^3),

and integrate the degree-3 part of ``Ch(a) ^ Td`` over the mesh for a
schedule of truncation degrees N.  Only 3-manifolds (n = 1) are handled.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .fock import DEFAULT_EPS, DEFAULT_TOL, DegenerateError, FockBasis, ModelOperator, default_margin, \
    model_from_expr, quotient
from .mesh import COMPONENTS, FormField, Mesh, exterior_d, integrate, make_sphere3, partial, wedge
from .symbolic.parser import OperatorExpr, coefficient_names, parse_operator

# Sign making the degree-1 Toeplitz symbol on S^3 report index -1; see calibrate_sign().
CALIBRATED_SIGN = 1

DEFAULT_CHUNK = 1024
BLOCK_TOL = 1e-13


class DegenerateNodeError(DegenerateError):
    """Some frozen model operator fails to be invertible; ``nodes`` lists them."""

    def __init__(self, message: str, nodes, coordinates=None):
        super().__init__(message, nodes)
        self.coordinates = coordinates or []


class NotStabilizedError(ValueError):
    def __init__(self, message: str, nodes=None):
        super().__init__(message)
        self.nodes = list(nodes or [])


class FormNotClosedError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


# -- freezing ------------------------------------------------------------------

@dataclass
class FrozenFamily:
    """Model operators of one expression at every node of a mesh.

    Coefficient values are stored flat (one entry per node, C order);
    :meth:`model` rebuilds the batched model operator for any node subset.
    """

    expr: OperatorExpr
    mesh: Mesh
    order: int
    n: int
    r: int
    values: dict[str, np.ndarray]

    @property
    def num_nodes(self) -> int:
        return self.mesh.num_nodes

    def model(self, nodes=slice(None)) -> ModelOperator:
        vals = {name: v[nodes] for name, v in self.values.items()}
        return model_from_expr(self.expr, self.n, self.r, vals, self.order)

    def __getitem__(self, node: int) -> ModelOperator:
        return self.model(int(node))


def freeze_family(expr: OperatorExpr | str, mesh: Mesh, coeff_fields: Mapping[str, object], d: int,
                  n: int = 1, decls: Mapping[str, object] | None = None) -> FrozenFamily:
    """Substitute coefficient values at each node and keep the weight-``d`` part.

    ``coeff_fields[name]`` is a constant (number or matrix) or an array of
    shape ``mesh.shape`` / ``mesh.shape + (r, r)``.
    """
    if n != 1:
        raise ValueError("index computations are implemented for 3-manifolds (n = 1) only")
    if isinstance(expr, str):
        expr = parse_operator(expr, decls or {}, n=n)
    names = coefficient_names(expr.root)
    unbound = sorted(names - set(coeff_fields))
    if unbound:
        raise KeyError(f"unbound coefficient(s) {unbound}")
    r = expr.r
    values = {}
    for name in names:
        v = np.asarray(coeff_fields[name], dtype=complex)
        matrix = expr.decls.get(name, 0) > 0
        vshape = (r, r) if matrix else ()
        if v.shape == vshape:
            v = np.broadcast_to(v, mesh.shape + vshape)
        if v.shape != mesh.shape + vshape:
            raise ValueError(f"field {name!r} has shape {v.shape}, expected {mesh.shape + vshape}")
        values[name] = v.reshape((mesh.num_nodes,) + vshape)
    fam = FrozenFamily(expr, mesh, d, n, r, values)
    fam.model()  # raises OrderError if the expression exceeds weight d somewhere
    return fam


# -- cocycle -------------------------------------------------------------------

@dataclass
class CocycleField:
    """Per-node matrices ``e_N a(P)_m e_N`` on the trivialized bundle V^N (x) C^r."""

    mesh: Mesh
    N: int
    n: int
    r: int
    matrices: np.ndarray  # mesh.shape + (D, D)
    sigma_min: np.ndarray
    residual: np.ndarray
    margin: int

    @property
    def basis(self) -> FockBasis:
        return FockBasis(self.n, self.N)

    @property
    def dim(self) -> int:
        return self.matrices.shape[-1]

    def block(self, k: int, l: int | None = None) -> np.ndarray:
        l = k if l is None else l
        b = self.basis
        return self.matrices[..., b.block_slice(k, self.r), b.block_slice(l, self.r)]

    def is_block_diagonal(self, tol: float = BLOCK_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrices))))
        for k in range(self.N + 1):
            for l in range(self.N + 1):
                if k != l and np.max(np.abs(self.block(k, l)), initial=0.0) > tol * scale:
                    return False
        return True

    def continuity(self) -> float:
        """Largest difference between adjacent node matrices divided by the grid spacing."""
        worst = 0.0
        for axis in range(3):
            diff = np.diff(self.matrices, axis=axis)
            if self.mesh.periodic[axis]:
                wrap = np.take(self.matrices, [0], axis=axis) - np.take(self.matrices, [-1], axis=axis)
                diff = np.concatenate([diff, wrap], axis=axis)
            norm = np.max(np.linalg.norm(diff, ord=2, axis=(-2, -1)))
            worst = max(worst, float(norm) / self.mesh.spacing[axis])
        return worst

    def inverse(self) -> CocycleField:
        return CocycleField(self.mesh, self.N, self.n, self.r, np.linalg.inv(self.matrices),
                            1.0 / np.linalg.norm(self.matrices, ord=2, axis=(-2, -1)), self.residual, self.margin)

    def direct_sum(self, other: CocycleField) -> CocycleField:
        """Block sum with ``other`` inside each degree block (coefficient size r + r')."""
        if other.mesh is not self.mesh or other.N != self.N or other.n != self.n:
            raise ValueError("cocycles live on different bundles")
        b = self.basis
        r = self.r + other.r
        D = b.dim * r
        out = np.zeros(self.mesh.shape + (D, D), dtype=complex)
        for k in range(self.N + 1):
            for l in range(self.N + 1):
                ks, ls = b.block_slice(k, r), b.block_slice(l, r)
                blk = np.zeros(self.mesh.shape + (ks.stop - ks.start, ls.stop - ls.start), dtype=complex)
                # degree blocks are (dim_k * r) x (dim_l * r); n = 1 keeps dim_k = 1
                blk[..., : self.r, : self.r] = self.block(k, l)
                blk[..., self.r:, self.r:] = other.block(k, l)
                out[..., ks, ls] = blk
        return CocycleField(self.mesh, self.N, self.n, r, out, np.minimum(self.sigma_min, other.sigma_min),
                            np.maximum(self.residual, other.residual), self.margin)


def build_cocycle(family: FrozenFamily, N: int, margin: int | None = None, tol: float = DEFAULT_TOL,
                  eps: float = DEFAULT_EPS, chunk: int = DEFAULT_CHUNK, require_stable: bool = True) -> CocycleField:
    """Evaluate ``a(P)`` at every node, failing with the full list of bad nodes.

    Raises :class:`DegenerateNodeError` where a compression of pi or pi^op
    has condition number above ``1/eps`` and, when ``require_stable``,
    :class:`NotStabilizedError` where growing the margin by 2 moves the
    result by more than ``tol``.
    """
    if margin is None:
        margin = default_margin(family.order)
    if margin < 2 * family.order:
        raise ValueError(f"margin={margin} must be >= 2*order={2 * family.order}")
    total = family.num_nodes
    D = FockBasis(family.n, N).dim * family.r
    mats = np.empty((total, D, D), dtype=complex)
    residual = np.empty(total)
    bad: list[int] = []
    for start in range(0, total, chunk):
        sl = slice(start, min(start + chunk, total))
        model = family.model(sl)
        X, ca, cb = quotient(model, N, margin)
        X2, ca2, cb2 = quotient(model, N, margin + 2)
        ok = (ca <= 1 / eps) & (cb <= 1 / eps) & (ca2 <= 1 / eps) & (cb2 <= 1 / eps)
        bad += (np.flatnonzero(~ok) + start).tolist()
        mats[sl] = X
        with np.errstate(invalid="ignore"):
            diff = np.nan_to_num(X - X2, nan=np.inf, posinf=np.inf, neginf=np.inf)
        residual[sl] = np.where(ok, np.linalg.norm(np.where(np.isfinite(diff), diff, 0), ord=2, axis=(-2, -1)), np.inf)
    if bad:
        coords = [family.mesh.node_coordinates(i) for i in bad[:20]]
        raise DegenerateNodeError(
            f"model operator not invertible at {len(bad)} node(s): first {bad[:20]} at {coords[:3]}",
            bad, coords,
        )
    unstable = np.flatnonzero(residual > tol)
    if require_stable and unstable.size:
        raise NotStabilizedError(
            f"a(P) not stable under margin growth at {unstable.size} node(s), max residual {residual.max():.3g}",
            unstable.tolist(),
        )
    smin = np.linalg.svd(mats, compute_uv=False)[..., -1]
    shape = family.mesh.shape
    return CocycleField(family.mesh, N, family.n, family.r, mats.reshape(shape + (D, D)),
                        smin.reshape(shape), residual.reshape(shape), margin)


# -- odd Chern character -------------------------------------------------------

def _chern_arrays(mesh: Mesh, a: np.ndarray, chunk_axis0: int = 4):
    """Coefficients of ch1 (3 components) and ch3 for a matrix field ``a`` on the mesh."""
    da = [partial(mesh, a, axis) for axis in range(3)]
    ch1 = np.empty((3,) + mesh.shape, dtype=complex)
    ch3 = np.empty(mesh.shape, dtype=complex)
    for i0 in range(0, mesh.shape[0], chunk_axis0):
        sl = slice(i0, i0 + chunk_axis0)
        ainv = np.linalg.inv(a[sl])
        th = [ainv @ d[sl] for d in da]
        for c in range(3):
            ch1[c, sl] = np.trace(th[c], axis1=-2, axis2=-1)
        # (th ^ th ^ th)_{012} = sum over permutations; traces of cyclic ones agree
        t012 = np.einsum("...ij,...jk,...ki->...", th[0], th[1], th[2])
        t021 = np.einsum("...ij,...jk,...ki->...", th[0], th[2], th[1])
        ch3[sl] = 3 * (t012 - t021)
    return ch1 / (2j * math.pi), ch3 / (24 * math.pi ** 2)


def chern_of_field(mesh: Mesh, a: np.ndarray) -> tuple[FormField, FormField]:
    """Odd Chern forms (ch1, ch3) of an invertible matrix field of shape ``mesh.shape + (m, m)``."""
    ch1, ch3 = _chern_arrays(mesh, a)
    return FormField(mesh, 1, ch1), FormField(mesh, 3, ch3[None])


def odd_chern(c: CocycleField) -> tuple[FormField, FormField]:
    """ch1 and ch3 of the cocycle; block-diagonal cocycles are handled block by block."""
    if c.is_block_diagonal():
        ch1 = np.zeros((3,) + c.mesh.shape, dtype=complex)
        ch3 = np.zeros(c.mesh.shape, dtype=complex)
        for k in range(c.N + 1):
            p1, p3 = _chern_arrays(c.mesh, np.ascontiguousarray(c.block(k)))
            ch1 += p1
            ch3 += p3
        return FormField(c.mesh, 1, ch1), FormField(c.mesh, 3, ch3[None])
    return chern_of_field(c.mesh, c.matrices)


# -- index integral ------------------------------------------------------------

@dataclass
class IndexEstimate:
    N: int
    value: complex
    per_k: list[complex] | None = None


def _even_parts(form, mesh: Mesh, closed_tol: float, what: str) -> tuple[np.ndarray, FormField | None]:
    """Degree-0 values and degree-2 part of an optional closed even form (default: 1)."""
    if form is None:
        return np.ones(mesh.shape), None
    if isinstance(form, FormField):
        form = {form.degree: form}
    elif not isinstance(form, Mapping):
        form = {0: form}
    if set(form) - {0, 2}:
        raise ValueError(f"{what} must have parts of degree 0 and 2 only on a 3-manifold")
    f0, f2 = form.get(0, 1.0), form.get(2)
    if not isinstance(f0, FormField):
        f0 = FormField.function(mesh, np.broadcast_to(np.asarray(f0, dtype=complex), mesh.shape))
    for f in (f0, f2):
        if f is None:
            continue
        if f.mesh is not mesh:
            raise ValueError(f"{what} lives on a different mesh")
        err = exterior_d(f).max_abs()
        if err > closed_tol:
            raise FormNotClosedError(f"{what} is not closed (|d| = {err:.3g})")
    return f0.values[0], f2


def _even_product(x, y, mesh: Mesh):
    """(x0 + x2) ^ (y0 + y2) truncated to degree <= 2."""
    (x0, x2), (y0, y2) = x, y
    two = None
    if x2 is not None:
        two = FormField(mesh, 2, x2.values * y0)
    if y2 is not None:
        term = FormField(mesh, 2, y2.values * x0)
        two = term if two is None else two + term
    return x0 * y0, two


def _degree3(ch1: FormField, ch3: FormField, even) -> FormField:
    e0, e2 = even
    top = FormField(ch3.mesh, 3, ch3.values * e0)
    if e2 is not None:
        top = top + wedge(ch1, e2)
    return top


def index_integral(c: CocycleField, td=None, ch_sym: Mapping[int, object] | None = None,
                   sign: int = CALIBRATED_SIGN, closed_tol: float = 1e-6) -> IndexEstimate:
    """Integrate the degree-3 part of ``Ch(c) ^ td`` (times ``sign``).

    For block-diagonal cocycles the integral is reported per degree k,
    each block weighted by the closed even form ``ch_sym[k]`` standing in
    for Ch(Sym^k H^{1,0}) (default 1: rank one for n = 1).
    """
    mesh = c.mesh
    t = _even_parts(td, mesh, closed_tol, "Td form")
    if c.is_block_diagonal():
        per_k = []
        for k in range(c.N + 1):
            ch1, ch3 = chern_of_field(mesh, np.ascontiguousarray(c.block(k)))
            even = t
            if ch_sym is not None and k in ch_sym:
                even = _even_product(_even_parts(ch_sym[k], mesh, closed_tol, f"Ch(Sym^{k}) form"), t, mesh)
            per_k.append(sign * integrate(_degree3(ch1, ch3, even)))
        return IndexEstimate(c.N, complex(sum(per_k)), per_k)
    if ch_sym is not None:
        raise ValueError("per-degree Ch(Sym^k) forms need a block-diagonal cocycle")
    ch1, ch3 = odd_chern(c)
    return IndexEstimate(c.N, sign * integrate(_degree3(ch1, ch3, t)))


@dataclass
class IndexReport:
    estimates: list[IndexEstimate]
    stabilized_estimate: complex
    nearest_integer: int
    integrality_residual: float
    index: int | None
    stabilized: bool
    stabilization_gap: float
    sign: int
    timings: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def cplx(z):
            return {"re": float(np.real(z)), "im": float(np.imag(z))}

        return {
            "config": self.config,
            "estimates": [
                {"N": e.N, "value": cplx(e.value),
                 "per_k": None if e.per_k is None else [cplx(v) for v in e.per_k]}
                for e in self.estimates
            ],
            "stabilized_estimate": cplx(self.stabilized_estimate),
            "nearest_integer": self.nearest_integer,
            "integrality_residual": self.integrality_residual,
            "index": self.index,
            "stabilized": self.stabilized,
            "stabilization_gap": self.stabilization_gap,
            "sign": self.sign,
            "diagnostics": self.diagnostics,
            "timings": self.timings,
        }


def compute_index(family: FrozenFamily, schedule, margin: int | None = None, tol: float = DEFAULT_TOL,
                  eps: float = DEFAULT_EPS, td=None, ch_sym=None, sign: int = CALIBRATED_SIGN,
                  stab_tol: float = 1e-6, integrality_tol: float = 0.05, chunk: int = DEFAULT_CHUNK,
                  config: dict | None = None) -> IndexReport:
    """Run the truncation schedule and report the index.

    ``stabilized`` compares the last two estimates against ``stab_tol``; the
    integer is reported only within ``integrality_tol`` of the estimate.
    """
    schedule = list(schedule)
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError(f"schedule must be non-empty and strictly increasing, got {schedule}")
    timings = {"cocycle": 0.0, "chern": 0.0}
    estimates = []
    residual = 0.0
    sigma = math.inf
    for N in schedule:
        t = time.perf_counter()
        c = build_cocycle(family, N, margin, tol, eps, chunk)
        timings["cocycle"] += time.perf_counter() - t
        residual = max(residual, float(c.residual.max()))
        sigma = min(sigma, float(c.sigma_min.min()))
        t = time.perf_counter()
        estimates.append(index_integral(c, td, ch_sym, sign))
        timings["chern"] += time.perf_counter() - t
    final = estimates[-1].value
    gap = abs(final - estimates[-2].value) if len(estimates) > 1 else 0.0
    nearest = int(round(final.real))
    resid = abs(final - nearest)
    return IndexReport(
        estimates=estimates,
        stabilized_estimate=final,
        nearest_integer=nearest,
        integrality_residual=float(resid),
        index=nearest if resid <= integrality_tol else None,
        stabilized=bool(gap <= stab_tol) if len(estimates) > 1 else True,
        stabilization_gap=float(gap),
        sign=sign,
        timings={k: round(v, 6) for k, v in timings.items()},
        config=config or {},
        diagnostics={"max_margin_residual": residual, "min_sigma": sigma},
    )


# -- the Toeplitz calibration example -----------------------------------------

SU2_SYMBOL = ("[[cos(eta)*exp(i*phi1), -sin(eta)*exp(-i*phi2)],"
              "[sin(eta)*exp(i*phi2), cos(eta)*exp(-i*phi1)]]")


def su2_symbol(mesh: Mesh) -> np.ndarray:
    """``[[z1, -conj(z2)], [z2, conj(z1)]]`` in Hopf coordinates (degree 1 map S^3 -> SU(2))."""
    eta, p1, p2 = (mesh.coordinate(x) for x in ("eta", "phi1", "phi2"))
    z1, z2 = np.cos(eta) * np.exp(1j * p1), np.sin(eta) * np.exp(1j * p2)
    return np.stack([np.stack([z1, -np.conj(z2)], -1), np.stack([z2, np.conj(z1)], -1)], -2)


def toeplitz_family(mesh: Mesh, symbol: np.ndarray) -> FrozenFamily:
    r = symbol.shape[-1]
    return freeze_family("Szego(a)", mesh, {"a": symbol}, 0, decls={"a": f"matrix({r})"})


def calibrate_sign(res: int = 24, N: int = 2) -> int:
    """Global sign making the degree-1 SU(2) Toeplitz symbol on S^3 report index -1."""
    mesh = make_sphere3(res)
    c = build_cocycle(toeplitz_family(mesh, su2_symbol(mesh)), N)
    raw = index_integral(c, sign=1).value
    nearest = round(raw.real)
    if abs(nearest) != 1 or abs(raw - nearest) > 0.05:
        raise CalibrationError(f"calibration integral {raw:.4f} is not within 0.05 of +-1")
    return -int(nearest)
