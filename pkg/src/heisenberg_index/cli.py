"""Command-line front end.

    heisenberg-index spectrum --config cfg.json
    heisenberg-index rockland --config cfg.json
    heisenberg-index cocycle  --config cfg.json [--res R]
    heisenberg-index index    --config cfg.json [--schedule 4:14:2] [--res R] [--out report.json]
    heisenberg-index weyl-check [--seed S]

Exit codes: 0 ok, 1 failed check (weyl-check), 2 parse/config error,
3 degenerate model operator, 4 non-stabilized run, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import index as ix
from .config import ConfigError, RunConfig, load_config, parse_schedule
from .fock import DegenerateError, block_spectra, rockland_check
from .mesh import MeshError, SingularNodeError, write_csv
from .symbolic.algebra import OrderError
from .symbolic.parser import ParseError, to_env
from .weyl import WeylPoly, sharp

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_DEGENERATE, EXIT_UNSTABLE, EXIT_IO = 0, 1, 2, 3, 4, 5


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _cplx_list(values) -> dict:
    v = np.asarray(values, dtype=complex)
    return {"re": v.real.tolist(), "im": v.imag.tolist()}


# -- subcommands --------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> tuple[dict, int]:
    if cfg.expr.has_szego:
        model = cfg.model()
        A = model.pi(cfg.N)
        blocks = []
        for k in range(cfg.N + 1):
            ev = np.linalg.eigvals(A.block(k, k))
            blocks.append(ev[np.lexsort((ev.imag, ev.real))])
    else:
        blocks = block_spectra(to_env(cfg.expr, cfg.n, cfg.r, cfg.constant_values()), cfg.N)
    out = {"config": cfg.to_dict(), "blocks": [dict(k=k, **_cplx_list(ev)) for k, ev in enumerate(blocks)]}
    return out, EXIT_OK


def cmd_rockland(cfg: RunConfig) -> tuple[dict, int]:
    model = cfg.model()
    rep = rockland_check(model, max(cfg.N, 2 * model.order), cfg.eps)
    code = EXIT_DEGENERATE if rep.verdict == "degenerate" else EXIT_OK
    return {"config": cfg.to_dict(), "rockland": rep.to_dict()}, code


def _cocycle(cfg: RunConfig, N: int):
    return ix.build_cocycle(cfg.family(), N, cfg.margin, cfg.tol, cfg.eps)


def _maybe_csv(cfg: RunConfig, c) -> None:
    path = cfg.outputs.get("csv")
    if path:
        ch1, ch3 = ix.odd_chern(c)
        write_csv(path, {"ch1": ch1, "ch3": ch3})


def cmd_cocycle(cfg: RunConfig) -> tuple[dict, int]:
    t = time.perf_counter()
    c = _cocycle(cfg, cfg.N)
    elapsed = time.perf_counter() - t
    blocks = []
    for k in range(c.N + 1):
        b = c.block(k).reshape((-1,) + c.block(k).shape[-2:])
        blocks.append({"k": k, "min_abs": float(np.min(np.abs(np.linalg.eigvals(b)))),
                       "max_abs": float(np.max(np.abs(b)))})
    out = {
        "config": cfg.to_dict(),
        "mesh": c.mesh.describe(),
        "N": c.N,
        "dim": c.dim,
        "margin": c.margin,
        "min_sigma": float(c.sigma_min.min()),
        "max_margin_residual": float(c.residual.max()),
        "continuity": c.continuity(),
        "block_diagonal": c.is_block_diagonal(),
        "blocks": blocks,
        "timings": {"cocycle": round(elapsed, 6)},
    }
    _maybe_csv(cfg, c)
    return out, EXIT_OK


def cmd_index(cfg: RunConfig) -> tuple[dict, int]:
    sign = ix.calibrate_sign() if cfg.sign == "calibrate" else cfg.sign
    fam = cfg.family()
    rep = ix.compute_index(fam, cfg.schedule, cfg.margin, cfg.tol, cfg.eps, sign=sign,
                           stab_tol=cfg.stab_tol, integrality_tol=cfg.integrality_tol, config=cfg.to_dict())
    if cfg.outputs.get("csv"):
        _maybe_csv(cfg, _cocycle(cfg, cfg.schedule[-1]))
    code = EXIT_OK if rep.stabilized and rep.index is not None else EXIT_UNSTABLE
    return rep.to_dict(), code


def cmd_weyl_check(seed: int, trials: int = 5, tol: float = 1e-10) -> tuple[dict, int]:
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for n in (1, 2):
        one = WeylPoly.constant(1.0, n)
        for _ in range(trials):
            f, g, h = (WeylPoly.random(rng, n, 3) for _ in range(3))
            assoc = sharp(sharp(f, g), h).max_abs_diff(sharp(f, sharp(g, h)))
            unit = max(sharp(one, f).max_abs_diff(f), sharp(f, one).max_abs_diff(f))
            top = sharp(f, g).top_part().max_abs_diff(f.top_part() * g.top_part())
            good = assoc <= tol and unit <= tol and top == 0.0
            ok &= good
            rows.append({"n": n, "associativity": assoc, "unit": unit, "top_degree": top, "ok": good})
    return {"seed": seed, "tol": tol, "trials": rows, "ok": ok}, EXIT_OK if ok else EXIT_CHECK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heisenberg-index", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "rockland", "cocycle", "index"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run config")
        s.add_argument("--out", help="write the JSON report here instead of stdout")
        s.add_argument("--schedule", help="truncation schedule N0:N1:step (overrides the config)")
        s.add_argument("--res", type=int, help="mesh resolution (overrides the config)")
        s.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    s = sub.add_parser("weyl-check")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--config", help="ignored")
    return p


def _run(args) -> tuple[dict, int, str | None]:
    if args.command == "weyl-check":
        out, code = cmd_weyl_check(args.seed)
        return out, code, args.out
    cfg = load_config(args.config)
    if args.res is not None or args.schedule is not None:
        cfg = cfg.with_overrides(args.res, parse_schedule(args.schedule) if args.schedule else None)
    handler = {"spectrum": cmd_spectrum, "rockland": cmd_rockland,
               "cocycle": cmd_cocycle, "index": cmd_index}[args.command]
    out, code = handler(cfg)
    return out, code, args.out or cfg.outputs.get("report")


def _fail(code: int, kind: str, exc: Exception, extra: dict | None = None) -> int:
    payload = {"error": kind, "message": str(exc)}
    payload.update(extra or {})
    sys.stderr.write(dumps(payload))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out, code, path = _run(args)
    except (ParseError, ConfigError, OrderError, KeyError, MeshError) as exc:
        return _fail(EXIT_PARSE, "parse", exc)
    except ix.DegenerateNodeError as exc:
        return _fail(EXIT_DEGENERATE, "degenerate", exc,
                     {"nodes": exc.nodes[:100], "coordinates": exc.coordinates})
    except (DegenerateError, SingularNodeError) as exc:
        return _fail(EXIT_DEGENERATE, "degenerate", exc, {"nodes": list(getattr(exc, "nodes", []))[:100]})
    except (ix.NotStabilizedError, ix.CalibrationError) as exc:
        return _fail(EXIT_UNSTABLE, "not-stabilized", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    text = dumps(out)
    try:
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    return code


if __name__ == "__main__":
    sys.exit(main())
