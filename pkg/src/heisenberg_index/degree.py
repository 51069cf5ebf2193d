"""Brouwer degree of a map from a 3-manifold chart into S^3 = SU(2) by signed preimage counting.

The map is given in closed form on chart coordinates and returns unit
quaternions ``(Re alpha, Im alpha, Re beta, Im beta)`` for
``[[alpha, -conj(beta)], [beta, conj(alpha)]]``.  Preimages of a regular
value q are located by a grid scan followed by Newton iteration on the
tangent space at q; each contributes ``sign det[f, df/dx1, df/dx2, df/dx3]``.
The target S^3 carries the orientation of the Hopf chart (eta, phi1, phi2),
so the identity map of the sphere has degree +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2 * math.pi
Map = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class DegreeResult:
    degree: int
    preimages: list[tuple[float, float, float]]
    signs: list[int]
    value: tuple[float, ...]


def quaternion_of(m: np.ndarray) -> np.ndarray:
    """Unit quaternion of a nonzero real multiple of an SU(2) matrix (first column, normalized)."""
    m = np.asarray(m)
    alpha, beta = m[..., 0, 0], m[..., 1, 0]
    q = np.stack([alpha.real, alpha.imag, beta.real, beta.imag], axis=-1)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def hopf_identity(eta, phi1, phi2) -> np.ndarray:
    return np.stack([np.cos(eta) * np.cos(phi1), np.cos(eta) * np.sin(phi1),
                     np.sin(eta) * np.cos(phi2), np.sin(eta) * np.sin(phi2)], axis=-1)


def _jacobian(f: Map, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference derivatives, shape (k, 3, 4)."""
    cols = []
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        cols.append((f(*(x + e).T) - f(*(x - e).T)) / (2 * h))
    return np.stack(cols, axis=1)


def _tangent_basis(q: np.ndarray) -> np.ndarray:
    """Orthonormal basis (3, 4) of the tangent space of S^3 at q."""
    full = np.linalg.qr(np.column_stack([q, np.eye(4)]))[0]
    return full[:, 1:].T


def _orientation_sign(f: Map, x: np.ndarray) -> np.ndarray:
    fx = f(*x.T)
    J = _jacobian(f, x)
    return np.sign(np.linalg.det(np.concatenate([fx[:, None, :], J], axis=1)))


_TARGET_SIGN = int(_orientation_sign(hopf_identity, np.array([[0.6, 0.3, 1.1]]))[0])


def _chart(kind: str):
    if kind == "sphere3":
        return np.array([0.0, 0.0, 0.0]), np.array([math.pi / 2, TWO_PI, TWO_PI]), (False, True, True)
    if kind == "torus3":
        return np.zeros(3), np.full(3, TWO_PI), (True, True, True)
    raise ValueError(f"unknown chart {kind!r}")


def mapping_degree(f: Map, kind: str, q=None, res: int = 40, newton_steps: int = 40,
                   tol: float = 1e-11) -> DegreeResult:
    """Signed count of preimages of the regular value ``q`` under ``f``."""
    q = np.array([0.31, -0.52, 0.67, 0.43]) if q is None else np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    lo, hi, periodic = _chart(kind)
    axes = [lo[a] + (np.arange(res) + 0.5) * (hi[a] - lo[a]) / res for a in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    dist = np.linalg.norm(f(*grid.T) - q, axis=-1)
    # every preimage lies within one cell of a node; keep a generous neighbourhood
    step = np.max(np.linalg.norm(_jacobian(f, grid), axis=-1)) * max((hi - lo) / res)
    x = grid[dist < 2 * step]
    B = _tangent_basis(q)
    for _ in range(newton_steps):
        r = (f(*x.T) - q) @ B.T
        J = np.einsum("kai,bi->kba", _jacobian(f, x), B)
        dx = np.clip(np.einsum("kab,kb->ka", np.linalg.pinv(J), r), -0.5, 0.5)
        x = x - dx
        for a in range(3):
            if periodic[a]:
                x[:, a] = np.mod(x[:, a] - lo[a], hi[a] - lo[a]) + lo[a]
    fx = f(*x.T)
    inside = np.all([(x[:, a] > lo[a]) & (x[:, a] < hi[a]) for a in range(3) if not periodic[a]] or [True], axis=0)
    good = (np.linalg.norm(fx - q, axis=-1) < tol) & inside
    roots: list[np.ndarray] = []
    for p in x[good]:
        if not any(_chart_distance(p, s, lo, hi, periodic) < 1e-6 for s in roots):
            roots.append(p)
    if not roots:
        return DegreeResult(0, [], [], tuple(map(float, q)))
    pts = np.array(roots)
    signs = (_TARGET_SIGN * _orientation_sign(f, pts)).astype(int)
    if np.any(signs == 0):
        raise ValueError("q is not a regular value; pick another")
    return DegreeResult(int(signs.sum()), [tuple(map(float, p)) for p in pts], signs.tolist(), tuple(map(float, q)))


def _chart_distance(a, b, lo, hi, periodic) -> float:
    d = np.abs(a - b)
    for k in range(3):
        if periodic[k]:
            d[k] = min(d[k], (hi[k] - lo[k]) - d[k])
    return float(np.max(d))
