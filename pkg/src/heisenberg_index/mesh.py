"""Discretized model contact 3-manifolds and matrix-valued differential forms.

Two meshes are provided, both with globally trivial contact bundles:

* ``torus3``: the flat torus with coordinates (phi1, phi2, phi3), periodic.
* ``sphere3``: the unit sphere S^3 in Hopf coordinates
  ``z1 = cos(eta) e^{i phi1}, z2 = sin(eta) e^{i phi2}`` with eta in
  (0, pi/2) sampled at half-cell offsets, phi1 and phi2 periodic.

Forms are stored by components on the coordinate coframe; a p-form has
one array per increasing index triple, ordered as
``itertools.combinations(range(3), p)``.  Orientation is the coordinate
order (d eta ^ d phi1 ^ d phi2, resp. d phi1 ^ d phi2 ^ d phi3).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COMPONENTS = {p: list(itertools.combinations(range(3), p)) for p in range(4)}
COND_LIMIT = 1e12


class MeshError(ValueError):
    pass


class SingularNodeError(ValueError):
    """Pointwise inverse requested at a numerically singular node."""

    def __init__(self, message: str, nodes):
        super().__init__(message)
        self.nodes = list(nodes)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Tensor-product grid with per-node volume weights.

    ``weights`` integrate functions against the Riemannian volume;
    ``density`` is the volume-form coefficient on the coordinate coframe,
    so top forms are integrated with ``weights / density``.
    """

    kind: str
    res: int
    axes: tuple[str, str, str]
    spacing: tuple[float, float, float]
    periodic: tuple[bool, bool, bool]
    coords: tuple[np.ndarray, np.ndarray, np.ndarray]
    weights: np.ndarray
    density: np.ndarray
    total_volume: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.weights.shape

    @property
    def num_nodes(self) -> int:
        return self.weights.size

    @property
    def coord_weights(self) -> np.ndarray:
        return self.weights / self.density

    def coordinate(self, name: str) -> np.ndarray:
        try:
            return self.coords[self.axes.index(name)]
        except ValueError:
            raise MeshError(f"coordinate {name!r} is not defined on {self.kind}") from None

    def node_coordinates(self, node: int) -> dict[str, float]:
        idx = np.unravel_index(node, self.shape)
        return {name: float(c[idx]) for name, c in zip(self.axes, self.coords)}

    def describe(self) -> dict:
        return {"kind": self.kind, "res": self.res}


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)


def make_torus3(res: int) -> Mesh:
    if res < 8:
        raise MeshError(f"resolution must be >= 8, got {res}")
    h = 2 * math.pi / res
    axis = np.arange(res) * h
    coords = np.meshgrid(axis, axis, axis, indexing="ij")
    weights = np.full((res,) * 3, h ** 3)
    density = np.ones((res,) * 3)
    _readonly(*coords, weights, density)
    return Mesh("torus3", res, ("phi1", "phi2", "phi3"), (h, h, h), (True, True, True),
                tuple(coords), weights, density, (2 * math.pi) ** 3)


def make_sphere3(res: int) -> Mesh:
    if res < 8:
        raise MeshError(f"resolution must be >= 8, got {res}")
    d_eta = 0.5 * math.pi / res
    h = 2 * math.pi / res
    eta = (np.arange(res) + 0.5) * d_eta
    phi = np.arange(res) * h
    # exact cell integrals of sin(eta) cos(eta) d eta
    lo, hi = eta - 0.5 * d_eta, eta + 0.5 * d_eta
    w_eta = 0.5 * (np.sin(hi) ** 2 - np.sin(lo) ** 2)
    coords = np.meshgrid(eta, phi, phi, indexing="ij")
    weights = np.broadcast_to(w_eta[:, None, None] * h * h, (res,) * 3).copy()
    density = np.sin(coords[0]) * np.cos(coords[0])
    _readonly(*coords, weights, density)
    return Mesh("sphere3", res, ("eta", "phi1", "phi2"), (d_eta, h, h), (False, True, True),
                tuple(coords), weights, density, 2 * math.pi ** 2)


def make_mesh(kind: str, res: int) -> Mesh:
    if kind == "torus3":
        return make_torus3(res)
    if kind == "sphere3":
        return make_sphere3(res)
    raise MeshError(f"unknown manifold kind {kind!r}")


# -- forms -------------------------------------------------------------------

class FormField:
    """p-form with scalar or r x r matrix values at every node.

    ``values`` has shape ``(C(3, p),) + mesh.shape + value_shape`` where
    ``value_shape`` is ``()`` or ``(r, r)``.
    """

    __slots__ = ("mesh", "degree", "values")

    def __init__(self, mesh: Mesh, degree: int, values):
        if degree not in COMPONENTS:
            raise MeshError(f"form degree must be 0..3, got {degree}")
        values = np.asarray(values)
        ncomp = len(COMPONENTS[degree])
        if values.shape[:4] != (ncomp,) + mesh.shape:
            raise MeshError(f"values shape {values.shape} does not start with {(ncomp,) + mesh.shape}")
        if values.ndim not in (4, 6) or (values.ndim == 6 and values.shape[-1] != values.shape[-2]):
            raise MeshError("values must be scalar or square-matrix valued")
        self.mesh = mesh
        self.degree = degree
        self.values = values

    @classmethod
    def function(cls, mesh: Mesh, values) -> FormField:
        """0-form from an array of shape ``mesh.shape + value_shape``."""
        return cls(mesh, 0, np.asarray(values)[None])

    @classmethod
    def from_components(cls, mesh: Mesh, degree: int, components: dict) -> FormField:
        """Build from ``{index_tuple: array}``; missing components are zero."""
        sample = np.asarray(next(iter(components.values())))
        vshape = sample.shape[3:]
        out = np.zeros((len(COMPONENTS[degree]),) + mesh.shape + vshape, dtype=np.result_type(sample, float))
        for idx, arr in components.items():
            out[COMPONENTS[degree].index(tuple(idx))] = arr
        return cls(mesh, degree, out)

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.values.shape[4:]

    @property
    def is_matrix(self) -> bool:
        return bool(self.value_shape)

    def component(self, idx) -> np.ndarray:
        return self.values[COMPONENTS[self.degree].index(tuple(idx))]

    def __add__(self, other: FormField) -> FormField:
        _same(self, other)
        return FormField(self.mesh, self.degree, self.values + other.values)

    def __sub__(self, other: FormField) -> FormField:
        _same(self, other)
        return FormField(self.mesh, self.degree, self.values - other.values)

    def scale(self, s) -> FormField:
        return FormField(self.mesh, self.degree, self.values * s)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _same(a: FormField, b: FormField) -> None:
    if a.mesh is not b.mesh or a.degree != b.degree:
        raise MeshError("forms live on different meshes or have different degrees")


def partial(mesh: Mesh, arr: np.ndarray, axis: int) -> np.ndarray:
    """Centered second-order difference along grid axis ``axis`` (0..2).

    Periodic axes wrap; the eta axis of the sphere uses one-sided
    second-order stencils at its two ends.
    """
    h = mesh.spacing[axis]
    if mesh.periodic[axis]:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2 * h)
    return np.gradient(arr, h, axis=axis, edge_order=2)


def exterior_d(f: FormField) -> FormField:
    if f.degree >= 3:
        raise MeshError("exterior derivative of a 3-form on a 3-manifold")
    p = f.degree
    comps = COMPONENTS[p + 1]
    out = np.zeros((len(comps),) + f.values.shape[1:], dtype=np.result_type(f.values, float))
    for ci, K in enumerate(comps):
        for pos, a in enumerate(K):
            rest = K[:pos] + K[pos + 1:]
            src = f.values[COMPONENTS[p].index(rest)]
            term = partial(f.mesh, src, a)
            out[ci] += term if pos % 2 == 0 else -term
    return FormField(f.mesh, p + 1, out)


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _pointwise_product(x: np.ndarray, y: np.ndarray, xm: bool, ym: bool) -> np.ndarray:
    if xm and ym:
        return x @ y
    if xm:
        return x * y[..., None, None]
    if ym:
        return x[..., None, None] * y
    return x * y


def wedge(f: FormField, g: FormField) -> FormField:
    """Graded product; matrix values multiply in order (f then g)."""
    if f.mesh is not g.mesh:
        raise MeshError("forms live on different meshes")
    p, q = f.degree, g.degree
    if p + q > 3:
        raise MeshError(f"wedge of degrees {p} and {q} exceeds 3")
    if f.is_matrix and g.is_matrix and f.value_shape != g.value_shape:
        raise MeshError(f"matrix sizes differ: {f.value_shape} vs {g.value_shape}")
    vshape = f.value_shape or g.value_shape
    comps = COMPONENTS[p + q]
    dtype = np.result_type(f.values, g.values)
    out = np.zeros((len(comps),) + f.mesh.shape + vshape, dtype=dtype)
    for i, I in enumerate(COMPONENTS[p]):
        for j, J in enumerate(COMPONENTS[q]):
            if set(I) & set(J):
                continue
            K = tuple(sorted(I + J))
            prod = _pointwise_product(f.values[i], g.values[j], f.is_matrix, g.is_matrix)
            out[comps.index(K)] += _perm_sign(I + J) * prod
    return FormField(f.mesh, p + q, out)


def mat_mul_pointwise(f: FormField, g: FormField) -> FormField:
    return wedge(f, g)


def inverse_pointwise(f: FormField, cond_limit: float = COND_LIMIT) -> FormField:
    """Inverse of a matrix-valued 0-form; fails on nodes with condition number > cond_limit."""
    if f.degree != 0 or not f.is_matrix:
        raise MeshError("pointwise inverse needs a matrix-valued 0-form")
    vals = f.values[0]
    cond = np.linalg.cond(vals.reshape((-1,) + f.value_shape))
    bad = np.flatnonzero(~(cond <= cond_limit))
    if bad.size:
        raise SingularNodeError(f"singular matrix at {bad.size} node(s), first {bad[:10].tolist()}", bad.tolist())
    return FormField(f.mesh, 0, np.linalg.inv(vals)[None])


def trace_pointwise(f: FormField) -> FormField:
    if not f.is_matrix:
        return f
    return FormField(f.mesh, f.degree, np.trace(f.values, axis1=-2, axis2=-1))


def integrate(f: FormField) -> complex:
    """Quadrature of a scalar 3-form over the closed mesh."""
    if f.degree != 3:
        raise MeshError(f"can only integrate 3-forms, got degree {f.degree}")
    if f.is_matrix:
        raise MeshError("integrate a scalar form (take the trace first)")
    return complex(np.sum((f.values[0] * f.mesh.coord_weights).ravel()))


def volume_form(mesh: Mesh) -> FormField:
    return FormField(mesh, 3, mesh.density[None].astype(float))


def line_integral(f: FormField, axis: int, at: tuple[int, int]) -> complex:
    """Integral of a scalar 1-form along the coordinate circle ``axis`` through grid index ``at``."""
    if f.degree != 1 or f.is_matrix:
        raise MeshError("line integrals take scalar 1-forms")
    if not f.mesh.periodic[axis]:
        raise MeshError("line integrals run along periodic axes only")
    comp = f.values[COMPONENTS[1].index((axis,))]
    line = np.moveaxis(comp, axis, 0)[(slice(None),) + tuple(at)]
    return complex(np.sum(line) * f.mesh.spacing[axis])


def winding_number(values) -> float:
    """``(1/2 pi i) * loop integral of d log det a`` for samples of a closed loop.

    Uses phase increments between consecutive samples, so the result is an
    exact integer whenever each increment is smaller than pi.
    """
    v = np.asarray(values, dtype=complex)
    dets = np.linalg.det(v) if v.ndim == 3 else v
    ratio = np.roll(dets, -1) / dets
    return float(np.sum(np.angle(ratio)) / (2 * math.pi))


def circle_winding(f: FormField, axis: int, at: tuple[int, int]) -> float:
    """Winding number of a 0-form (scalar or matrix) along a coordinate circle."""
    if f.degree != 0:
        raise MeshError("winding numbers take 0-forms")
    if not f.mesh.periodic[axis]:
        raise MeshError("winding numbers run along periodic axes only")
    vals = np.moveaxis(f.values[0], axis, 0)[(slice(None),) + tuple(at)]
    return winding_number(vals)


def write_csv(path, fields: dict[str, FormField]) -> None:
    """Dump node coordinates and all components of the given forms (real and imaginary parts)."""
    if not fields:
        raise MeshError("nothing to write")
    mesh = next(iter(fields.values())).mesh
    columns = list(mesh.axes)
    data = [c.ravel() for c in mesh.coords]
    for name, f in fields.items():
        if f.mesh is not mesh:
            raise MeshError("fields live on different meshes")
        for ci, idx in enumerate(COMPONENTS[f.degree]):
            tag = "".join(str(i) for i in idx) or "0"
            comp = f.values[ci].reshape((mesh.num_nodes, -1))
            for e in range(comp.shape[1]):
                suffix = f"_{e}" if comp.shape[1] > 1 else ""
                columns += [f"{name}_{tag}{suffix}_re", f"{name}_{tag}{suffix}_im"]
                data += [comp[:, e].real, comp[:, e].imag]
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in zip(*data):
            writer.writerow([repr(float(x)) for x in row])
