"""Run configuration: JSON in, mesh + frozen family out.

A config is a JSON object::

    {
      "manifold": {"kind": "torus3", "res": 24},
      "n": 1,
      "operator": "Z1*Zb1 - i*(1 - b)*T",
      "order": 2,
      "coefficients": {"b": "0.5 + 0.3*cos(phi1)"},
      "N": 6,
      "schedule": "4:14:2",
      "margin": null, "eps": 1e-8, "tol": 1e-8,
      "stab_tol": 1e-6, "integrality_tol": 0.05,
      "sign": 1,
      "outputs": {"report": "report.json", "csv": "chern.csv"}
    }

Coefficients are closed-form strings (a bracketed literal makes a matrix)
or ``{"shape": "scalar" | "matrix(r)", "expr": ...}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .coeffexpr import CoeffExpr, parse_coeff_expr
from .fock import DEFAULT_EPS, DEFAULT_TOL, ModelOperator, model_from_expr, node_order
from .index import CALIBRATED_SIGN, FrozenFamily, freeze_family
from .mesh import Mesh, make_mesh
from .symbolic.parser import OperatorExpr, ParseError, coefficient_names, normalize_decl, parse_operator


class ConfigError(ParseError):
    pass


def parse_schedule(spec) -> list[int]:
    """``"N0:N1:step"`` (inclusive) or an explicit list of degrees."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"schedule {spec!r} is not N0:N1[:step]")
        try:
            n0, n1, step = (int(p) for p in parts + ["2"] * (3 - len(parts)))
        except ValueError as exc:
            raise ConfigError(f"schedule {spec!r} has non-integer parts") from exc
        if step <= 0:
            raise ConfigError("schedule step must be positive")
        out = list(range(n0, n1 + 1, step))
    else:
        out = [int(x) for x in spec]
    if not out or any(b <= a for a, b in zip(out, out[1:])) or out[0] < 0:
        raise ConfigError(f"schedule must be non-empty, non-negative and strictly increasing, got {out}")
    return out


@dataclass
class RunConfig:
    operator: str
    n: int = 1
    order: int | None = None
    coefficients: dict = field(default_factory=dict)
    manifold: dict | None = None
    N: int = 6
    schedule: list[int] = field(default_factory=lambda: [4, 6, 8])
    margin: int | None = None
    eps: float = DEFAULT_EPS
    tol: float = DEFAULT_TOL
    stab_tol: float = 1e-6
    integrality_tol: float = 0.05
    sign: int | str = CALIBRATED_SIGN
    outputs: dict = field(default_factory=dict)

    # derived
    _fields: dict = field(default_factory=dict, repr=False)
    _expr: OperatorExpr | None = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {"operator", "n", "r", "order", "coefficients", "manifold", "N", "schedule", "margin",
                 "eps", "tol", "stab_tol", "integrality_tol", "sign", "outputs"}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigError(f"unknown config key(s) {extra}")
        if "operator" not in raw:
            raise ConfigError("config needs an 'operator'")
        kw = {k: raw[k] for k in known - {"r"} if k in raw}
        if "schedule" in kw:
            kw["schedule"] = parse_schedule(kw["schedule"])
        cfg = cls(**kw)
        cfg._validate(raw.get("r"))
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc.msg})", exc.pos) from exc
        return cls.from_dict(raw)

    def _validate(self, r_declared) -> None:
        for name in ("eps", "tol", "stab_tol", "integrality_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.sign not in (1, -1, "calibrate"):
            raise ConfigError("sign must be +1, -1 or \"calibrate\"")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.manifold is not None:
            if set(self.manifold) - {"kind", "res"} or "kind" not in self.manifold:
                raise ConfigError("manifold needs {'kind', 'res'}")
        decls = {}
        for name, spec in self.coefficients.items():
            if isinstance(spec, dict):
                if set(spec) - {"shape", "expr"} or "expr" not in spec:
                    raise ConfigError(f"coefficient {name!r} needs {{'shape', 'expr'}}")
                src = spec["expr"]
            else:
                src = spec
            if not isinstance(src, (str, int, float)):
                raise ConfigError(f"coefficient {name!r} must be an expression string")
            ce = parse_coeff_expr(str(src))
            declared = normalize_decl(spec.get("shape", "scalar" if ce.size == 0 else ce.size)) \
                if isinstance(spec, dict) else ce.size
            if declared != ce.size:
                raise ConfigError(f"coefficient {name!r} declared with size {declared} but expression has {ce.size}")
            self._fields[name] = ce
            decls[name] = ce.size
        self._expr = parse_operator(self.operator, decls, n=self.n)
        missing = sorted(coefficient_names(self._expr.root) - set(self._fields))
        if missing:
            raise ConfigError(f"undefined coefficient(s) {missing}")
        if r_declared is not None and int(r_declared) != self.r:
            raise ConfigError(f"r={r_declared} disagrees with coefficient size {self.r}")

    @property
    def expr(self) -> OperatorExpr:
        return self._expr

    @property
    def r(self) -> int:
        return self._expr.r

    @property
    def coefficient_fields(self) -> dict[str, CoeffExpr]:
        return dict(self._fields)

    def with_overrides(self, res: int | None = None, schedule=None) -> RunConfig:
        raw = self.to_dict()
        if res is not None:
            if raw.get("manifold") is None:
                raise ConfigError("--res given but the config has no manifold")
            raw["manifold"] = dict(raw["manifold"], res=res)
        if schedule is not None:
            raw["schedule"] = schedule
        return RunConfig.from_dict(raw)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}
        out["r"] = self.r
        return out

    # -- building blocks --------------------------------------------------------

    def mesh(self) -> Mesh:
        if self.manifold is None:
            raise ConfigError("this command needs a 'manifold'")
        return make_mesh(self.manifold["kind"], int(self.manifold.get("res", 24)))

    def constant_values(self) -> dict:
        try:
            return {name: ce.constant() for name, ce in self._fields.items()}
        except ParseError as exc:
            raise ConfigError(f"this command needs constant coefficients: {exc}") from exc

    def model(self) -> ModelOperator:
        """Model operator of a constant-coefficient config."""
        return model_from_expr(self._expr, self.n, self.r, self.constant_values(), self.order)

    def family(self, mesh: Mesh | None = None) -> FrozenFamily:
        mesh = mesh or self.mesh()
        values = {name: ce.evaluate(mesh) for name, ce in self._fields.items()}
        order = self.order if self.order is not None else self.model_order()
        return freeze_family(self._expr, mesh, values, order, n=self.n)

    def model_order(self) -> int:
        """Syntactic Heisenberg order of the expression (Z, Zb weigh 1, T weighs 2)."""
        return node_order(self._expr.root)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file {p} not found")
    return RunConfig.load(p)
