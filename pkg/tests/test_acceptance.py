"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (printed immediately and again in the
terminal summary) before asserting, so a failing criterion still reports
its measured numbers.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from heisenberg_index import index as ix
from heisenberg_index.config import RunConfig
from heisenberg_index.degree import mapping_degree, quaternion_of
from heisenberg_index.fock import FockBasis, ModelOperator, block_decay_profile, build_a, quantize, rockland_check
from heisenberg_index.mesh import (FormField, circle_winding, exterior_d, integrate, make_sphere3, make_torus3,
                                   volume_form)
from heisenberg_index.presets import SU2, SU2_INV, SU2_SUM, sublaplacian, toeplitz, torus_matrix_beta, twisted_config
from heisenberg_index.symbolic import EnvElement, formal_adjoint, op_involution, parse_operator, to_env
from heisenberg_index.weyl import WeylPoly, sharp

RESULTS: dict[int, str] = {}


def record(num: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def twisted_env(beta, n=1):
    return to_env(parse_operator(twisted_config(beta, n)["operator"], {"b": "scalar"}, n), n, 1, {"b": beta})


def cocycle_value(k, beta, n=1):
    return (n + 2 * k - beta) / (n + 2 * k + beta)


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_harmonic_oscillator():
    t = time.perf_counter()
    worst, mult_ok = 0.0, True
    for n in (1, 2, 3):
        P = to_env(parse_operator(sublaplacian(n), {}, n), n, 1, {})
        basis = FockBasis(n, 12)
        A = quantize(P, basis, basis).data
        degs = basis.degrees()
        worst = max(worst, np.abs(A - np.diag(degs + n / 2)).max())
        counts = np.bincount(degs)
        mult_ok &= all(counts[k] == math.comb(k + n - 1, n - 1) for k in range(13))
    elapsed = time.perf_counter() - t
    record(1, worst <= 1e-12 and mult_ok and elapsed < 1.0,
           f"max |quantize(Delta) - diag(k + n/2)| = {worst:.2e}, multiplicities ok = {mult_ok}, {elapsed:.2f}s")


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2_twisted_cocycle():
    t = time.perf_counter()
    worst = 0.0
    for beta in (0.3, 0.5 + 0.4j, -2.7):
        res = build_a(ModelOperator.from_env(twisted_env(beta)), 10)
        worst = max(worst, np.abs(res.matrix.data - np.diag(cocycle_value(np.arange(11), beta))).max())
    lam = [s * (1 + 2 * k) for k in range(5) for s in (1, -1)]
    # flagged: Lambda itself and perturbations well inside 1e-8
    near = [l + d for l in lam for d in (0.0, 5e-9, -5e-9, 5e-9j)]
    # not flagged: the three test values, dense samples off Lambda, points 1e-6 away
    far = [0.3, 0.5 + 0.4j, -2.7] + [l + d for l in lam for d in (1e-6, -1e-6, 1e-6j)]
    far += [b for b in np.linspace(-9.9, 9.9, 67) if min(abs(b - l) for l in lam) > 1e-3]
    wrong = [b for b in near if rockland_check(ModelOperator.from_env(twisted_env(b)), 10).verdict != "degenerate"]
    wrong += [b for b in far if rockland_check(ModelOperator.from_env(twisted_env(b)), 10).verdict != "rockland"]
    elapsed = time.perf_counter() - t
    record(2, worst <= 1e-10 and not wrong and elapsed < 1.0,
           f"max block error {worst:.2e}, misclassified beta {wrong[:5]}, {len(near) + len(far)} beta tested, "
           f"{elapsed:.2f}s")


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_compactness_decay():
    t = time.perf_counter()
    k = np.arange(10, 61)
    rows = []
    ok = True
    for beta in (0.3, 0.5, -0.5, 0.3 + 0.4j):
        prof = block_decay_profile(build_a(ModelOperator.from_env(twisted_env(beta)), 60).matrix)
        d = prof.diagonal[10:61]
        C = np.dot(d, 1 / k) / np.dot(1 / k, 1 / k)
        rel = np.linalg.norm(d - C / k) / np.linalg.norm(d)
        tail = max([prof.diagonal[50:].max()] + [v[50:].max() for v in prof.off_diagonal.values() if v.size > 50])
        ok &= rel < 0.10 and tail < 1e-2
        rows.append(f"beta={beta}: C={C:.3f} rel={rel:.3f} max_k>=50={tail:.2e}")
    elapsed = time.perf_counter() - t
    record(3, ok and elapsed < 5.0, "; ".join(rows) + f"; {elapsed:.2f}s")


# -- 4 ---------------------------------------------------------------------------

def random_element(rng, n, r, max_order=3, max_terms=6):
    terms = {}
    for _ in range(rng.integers(0, max_terms + 1)):
        while True:
            alpha = tuple(int(x) for x in rng.integers(0, max_order + 1, n))
            gamma = tuple(int(x) for x in rng.integers(0, max_order + 1, n))
            p = int(rng.integers(0, max_order // 2 + 1))
            if sum(alpha) + sum(gamma) + 2 * p <= max_order:
                break
        terms[(alpha, gamma, p)] = rng.integers(-3, 4, (r, r)) + 1j * rng.integers(-3, 4, (r, r))
    return EnvElement(n, r, terms)


def test_criterion_4_representation_homomorphism():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    op_bad = adj_bad = 0
    for _ in range(200):
        n, r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        P, Q = random_element(rng, n, r), random_element(rng, n, r)
        b = FockBasis(n, 3)
        lhs = quantize(P * Q, b)
        mid = quantize(Q, b)
        rhs = quantize(P, mid.codomain) @ mid
        k = min(lhs.codomain.dim, rhs.codomain.dim) * r
        worst = max(worst, np.abs(lhs.data[:k] - rhs.data[:k]).max(initial=0.0),
                    np.abs(lhs.data[k:]).max(initial=0.0), np.abs(rhs.data[k:]).max(initial=0.0))
        # op acts entrywise on coefficients; with r > 1 the anti-homomorphism is op composed with transpose
        opT = lambda X: op_involution(X).transpose_coefficients()
        op_bad += opT(P * Q) != opT(Q) * opT(P)
        adj_bad += formal_adjoint(P * Q) != formal_adjoint(Q) * formal_adjoint(P)
    elapsed = time.perf_counter() - t
    record(4, worst <= 1e-12 and op_bad == 0 and adj_bad == 0 and elapsed < 30,
           f"200 pairs: max |pi(PQ) - pi(P)pi(Q)| = {worst:.2e}, op failures {op_bad}, adjoint failures {adj_bad}, "
           f"{elapsed:.1f}s")


# -- 5, 6 --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def torus_run(m, eps, schedule="4:14:2"):
    cfg = RunConfig.from_dict(torus_matrix_beta(m, eps, res=24, schedule=schedule))
    t = time.perf_counter()
    rep = ix.compute_index(cfg.family(), cfg.schedule, stab_tol=cfg.stab_tol, integrality_tol=cfg.integrality_tol)
    return rep, time.perf_counter() - t, cfg


def test_criterion_5_stabilization():
    rep, elapsed, _ = torus_run(2.0, 0.2)
    vals = {e.N: e.value for e in rep.estimates}
    gaps = {N: abs(vals[N + 2] - vals[N]) for N in vals if N >= 8 and N + 2 in vals}
    ok = sorted(gaps) == [8, 10, 12] and max(gaps.values()) <= 1e-6 and elapsed < 600
    record(5, ok, f"torus3 matrix-beta res 24, estimates {[round(v.real, 8) for v in vals.values()]}, "
                  f"max gap N>=8 {max(gaps.values()):.2e}, {elapsed:.1f}s")


def lambda_distance(cfg, n=1):
    """Smallest distance from an eigenvalue of beta(m) to Lambda = {+-(n + 2k)}."""
    b = cfg.coefficient_fields["b"].evaluate(cfg.mesh())
    ev = np.linalg.eigvals(b).ravel()
    lam = np.array([s * (n + 2 * k) for k in range(20) for s in (1, -1)])
    return float(np.min(np.abs(ev[:, None] - lam[None, :])))


def test_criterion_6_integrality_and_homotopy():
    t = time.perf_counter()
    path = [(1.6 + 0.1 * j, 0.1 + 0.025 * j) for j in range(5)]
    rows, ints, ok = [], [], True
    for m, eps in path:
        rep, _, cfg = torus_run(round(m, 6), round(eps, 6))
        dist = lambda_distance(cfg)
        est = rep.stabilized_estimate
        ok &= rep.stabilized and abs(est - round(est.real)) <= 0.05 and dist > 0.05
        ints.append(round(est.real))
        rows.append(f"(m={m:.2f}, eps={eps:.3f}) -> {est.real:+.5f} [dist to Lambda {dist:.2f}]")
    for symbol in (SU2, SU2_INV, SU2_SUM):
        rep = sphere_run(symbol)
        ok &= rep.stabilized and rep.integrality_residual <= 0.05
    elapsed = time.perf_counter() - t
    ok &= len(set(ints)) == 1 and elapsed < 1800
    record(6, ok, f"homotopy integers {ints}; " + "; ".join(rows) + f"; {elapsed:.0f}s (the m=2.0 run is reused from criterion 5)")


# -- 7 ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def sphere_run(symbol):
    cfg = RunConfig.from_dict(toeplitz(symbol, res=24, schedule="2:4:2"))
    return ix.compute_index(cfg.family(), cfg.schedule, sign=ix.calibrate_sign())


def su2_quaternion(eta, p1, p2):
    z1, z2 = np.cos(eta) * np.exp(1j * p1), np.sin(eta) * np.exp(1j * p2)
    return quaternion_of(np.stack([np.stack([z1, -np.conj(z2)], -1), np.stack([z2, np.conj(z1)], -1)], -2))


def test_criterion_7_toeplitz():
    t = time.perf_counter()
    sign = ix.calibrate_sign()
    a, ainv, both = (sphere_run(s) for s in (SU2, SU2_INV, SU2_SUM))
    deg = mapping_degree(su2_quaternion, "sphere3")
    elapsed = time.perf_counter() - t
    ok = (a.index == -1 and abs(a.stabilized_estimate + 1) <= 0.05 and ainv.index == 1
          and abs(ainv.stabilized_estimate - 1) <= 0.05 and both.index == 0 and deg.degree == 1 and elapsed < 300)
    record(7, ok, f"sign {sign}; a -> {a.stabilized_estimate.real:+.5f}, a^-1 -> {ainv.stabilized_estimate.real:+.5f}, "
                  f"a+a^-1 -> {both.stabilized_estimate.real:+.2e}; degree oracle {deg.degree} "
                  f"({len(deg.preimages)} preimage); {elapsed:.1f}s")


# -- 8 ---------------------------------------------------------------------------

def test_criterion_8_scalar_index_vanishes():
    runs = [("torus3", "0.5 + 0.3*sin(phi1)*cos(phi2) + 0.2*i*sin(phi3)"),
            ("torus3", "-2 + 0.8*cos(phi1 + phi3)"),
            ("sphere3", "0.4 + 0.3*cos(eta)*sin(phi1) + 0.2*i*cos(phi2)"),
            ("sphere3", "2 + 0.5*sin(eta)*cos(phi1 - phi2)")]
    worst = 0.0
    for kind, beta in runs:
        cfg = RunConfig.from_dict(twisted_config(beta, manifold={"kind": kind, "res": 16}, schedule="2:8:2"))
        rep = ix.compute_index(cfg.family(), cfg.schedule)
        worst = max(worst, max(abs(e.value) for e in rep.estimates))
    record(8, worst <= 1e-8, f"{len(runs)} scalar-beta runs (torus3, sphere3), max |index estimate| = {worst:.2e}")


# -- 9 ---------------------------------------------------------------------------

RES = [16, 24, 32]


def order_of(errs):
    return -np.polyfit(np.log(RES), np.log(errs), 1)[0]


def torus_exact_df(m):
    # f = sin(phi1 + 2 phi2) + cos(2 phi2 - phi3)
    p1, p2, p3 = m.coords
    u, v = p1 + 2 * p2, 2 * p2 - p3
    return FormField(m, 1, np.stack([np.cos(u), 2 * np.cos(u) - 2 * np.sin(v), np.sin(v)]))


def sphere_exact_df(m):
    # f = Re(z1^2 conj(z2)) = cos^2(eta) sin(eta) cos(2 phi1 - phi2)
    e, p1, p2 = m.coords
    c, s = np.cos(e), np.sin(e)
    u = 2 * p1 - p2
    return FormField(m, 1, np.stack([(c ** 3 - 2 * c * s * s) * np.cos(u), -2 * c * c * s * np.sin(u),
                                     c * c * s * np.sin(u)]))


def sphere_two_form(m):
    # |z1|^2 (x1 dx2 - x2 dx1) ^ (x3 dx4 - x4 dx3) plus two d(eta) terms, all smooth on S^3
    e, p1, p2 = m.coords
    s, c = np.sin(e), np.cos(e)
    return FormField(m, 2, np.stack([c * c * s * np.cos(p1 - p2), s * s * c * np.sin(p2), c ** 4 * s * s]))


def torus_two_form(m):
    p1, p2, p3 = m.coords
    return FormField(m, 2, np.stack([np.exp(np.sin(p1 + p3)), np.cos(p2) * np.sin(p1), np.exp(np.cos(p2 - p3))]))


def test_criterion_9_mesh_suite():
    vol = 0.0
    for r in RES:
        vol = max(vol, abs(integrate(volume_form(make_torus3(r))) - (2 * math.pi) ** 3) / (2 * math.pi) ** 3,
                  abs(integrate(volume_form(make_sphere3(r))) - 2 * math.pi ** 2) / (2 * math.pi ** 2))
    dd_t = order_of([exterior_d(torus_exact_df(make_torus3(r))).max_abs() for r in RES])
    dd_s = order_of([exterior_d(sphere_exact_df(make_sphere3(r))).max_abs() for r in RES])
    st_t = max(abs(integrate(exterior_d(torus_two_form(make_torus3(r))))) for r in RES)
    st_errs = [abs(integrate(exterior_d(sphere_two_form(make_sphere3(r))))) for r in RES]
    st_s = order_of(st_errs)
    wind = 0.0
    m = make_torus3(24)
    for k in (-3, -1, 1, 2, 4):
        a = FormField.function(m, np.exp(1j * k * m.coordinate("phi2")))
        wind = max(wind, abs(circle_winding(a, 1, (2, 7)) - k))
    ok = (vol <= 1e-10 and abs(dd_t - 2) <= 0.2 and abs(dd_s - 2) <= 0.2 and st_t <= 1e-12
          and abs(st_s - 2) <= 0.2 and wind <= 1e-8)
    record(9, ok, f"volume rel err {vol:.1e}; d(d_exact f) order torus {dd_t:.2f}, sphere {dd_s:.2f}; "
                  f"Stokes torus max |int d w| {st_t:.1e}, sphere residuals {[f'{x:.2e}' for x in st_errs]} "
                  f"order {st_s:.2f}; winding err {wind:.1e}")


# -- 10 --------------------------------------------------------------------------

def test_criterion_10_weyl():
    rng = np.random.default_rng(10)
    assoc = unit = top = 0.0
    for n in (1, 2):
        one = WeylPoly.constant(1.0, n)
        for _ in range(20):
            f, g, h = (WeylPoly.random(rng, n, 3) for _ in range(3))
            assoc = max(assoc, sharp(sharp(f, g), h).max_abs_diff(sharp(f, sharp(g, h))))
            unit = max(unit, sharp(one, f).max_abs_diff(f), sharp(f, one).max_abs_diff(f))
            top = max(top, sharp(f, g).top_part().max_abs_diff(f.top_part() * g.top_part()))
    record(10, assoc <= 1e-10 and unit <= 1e-10 and top == 0.0,
           f"40 random cubic triples: associativity {assoc:.1e}, unit {unit:.1e}, top-degree defect {top:.1e}")


@pytest.fixture(scope="module", autouse=True)
def _summary():
    yield
    for num in sorted(RESULTS):
        print(RESULTS[num])
