"""Ready-made run configs for the standard examples (usable from tests and the CLI)."""

from __future__ import annotations

SU2 = ("[[cos(eta)*exp(i*phi1), -sin(eta)*exp(-i*phi2)],"
       "[sin(eta)*exp(i*phi2), cos(eta)*exp(-i*phi1)]]")
SU2_INV = ("[[cos(eta)*exp(-i*phi1), sin(eta)*exp(-i*phi2)],"
           "[-sin(eta)*exp(i*phi2), cos(eta)*exp(i*phi1)]]")
# a (+) a^{-1} as one 4 x 4 literal
SU2_SUM = ("[[cos(eta)*exp(i*phi1), -sin(eta)*exp(-i*phi2), 0, 0],"
           "[sin(eta)*exp(i*phi2), cos(eta)*exp(-i*phi1), 0, 0],"
           "[0, 0, cos(eta)*exp(-i*phi1), sin(eta)*exp(-i*phi2)],"
           "[0, 0, -sin(eta)*exp(i*phi2), cos(eta)*exp(i*phi1)]]")


def _zz(n: int) -> str:
    return " + ".join(f"Z{j}*Zb{j}" for j in range(1, n + 1))


def sublaplacian(n: int) -> str:
    """``sum_j Z_j Zb_j - i n T``: block k of its Fock image is (k + n/2) times the identity."""
    return f"{_zz(n)} - {n}*i*T"


def twisted(n: int = 1) -> str:
    """Twisted sub-Laplacian ``sum_j Z_j Zb_j - i (n - b) T`` with coefficient ``b``."""
    return f"{_zz(n)} - i*({n} - b)*T"


def twisted_config(beta, n: int = 1, manifold=None, **kw) -> dict:
    """Twisted sub-Laplacian with a constant or closed-form scalar/matrix ``beta``."""
    cfg = {"operator": twisted(n), "n": n, "order": 2, "coefficients": {"b": str(_expr(beta))}}
    if manifold is not None:
        cfg["manifold"] = manifold
    cfg.update(kw)
    return cfg


def wilson_beta(m: float, eps: float) -> str:
    """``I + eps*D`` with D the quaternion (sin phi1, sin phi2, sin phi3, m - sum cos phi_j).

    For 1 < m < 3, D/|D| is a degree one map T^3 -> S^3 and the lowest
    cocycle block ``(1 - b)(1 + b)^{-1}`` inherits that degree; the
    eigenvalues ``1 + eps*(d4 +- i|d|)`` stay off the exceptional set
    while ``eps*(m + 3) < 2``.
    """
    d4 = f"({m!r} - cos(phi1) - cos(phi2) - cos(phi3))"
    e = repr(float(eps))
    return (f"[[1 + {e}*({d4} + i*sin(phi3)), {e}*(i*sin(phi1) + sin(phi2))],"
            f"[{e}*(i*sin(phi1) - sin(phi2)), 1 + {e}*({d4} - i*sin(phi3))]]")


def torus_matrix_beta(m: float = 2.0, eps: float = 0.2, res: int = 24, schedule: str = "4:14:2") -> dict:
    return twisted_config(wilson_beta(m, eps), manifold={"kind": "torus3", "res": res}, schedule=schedule)


def toeplitz(symbol: str = SU2, res: int = 24, schedule: str = "2:4:2") -> dict:
    return {"operator": "Szego(a)", "n": 1, "order": 0, "coefficients": {"a": symbol},
            "manifold": {"kind": "sphere3", "res": res}, "schedule": schedule}


def _expr(v) -> str:
    if isinstance(v, str):
        return v
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return f"({v.real!r} + {v.imag!r}*i)"
