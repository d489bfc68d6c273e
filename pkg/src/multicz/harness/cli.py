"""``multicz`` command line.

Exit codes: 0 when every reported item passes, 1 when any item fails,
2 on configuration or usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from ..bmo import bmo_fit, symbol_from_recipe
from ..czkernel import kernel_from_config, random_h2_pairs, random_samples, verify_h1, verify_h2
from ..grid import ball_family, make_grid
from ..io import write_grid_binary, write_grid_csv
from ..maximal import MaximalParams, calM_loc, critical_cover, frak_m, m_loc, m_sharp_loc
from ..pseudo import class_samples, symbol_class_check, symbol_from_config
from ..weights import WeightRecipe, WeightVector, certify
from .campaign import run_campaign
from .config import CampaignConfig, ConfigError, load_config
from .families import make_family
from .report import emit_report

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _grid_arg(text: str) -> dict:
    try:
        n, L, G = text.split(",")
        return {"n": int(n), "L": float(L), "G": int(G)}
    except ValueError:
        raise argparse.ArgumentTypeError("expected n,L,G (e.g. 1,8,128)") from None


def _kv(text: str) -> dict:
    """``kind=log,eps=0.1`` -> ``{"kind": "log", "eps": 0.1}``."""
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON campaign config")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (CSV; JSON mirror alongside)")
    common.add_argument("--grid", type=_grid_arg, default=argparse.SUPPRESS, help="grid as n,L,G")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed")

    p = argparse.ArgumentParser(prog="multicz", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify-weight", parents=[common], help="growth-envelope certificate of weight recipes")
    c.add_argument("--recipe", type=_kv, action="append", help="eps0=..,x0=..,a=..,b=.. (repeat per slot)")
    c.add_argument("--p", type=_floats, default=None, help="exponent(s); one per recipe")

    c = sub.add_parser("bmo-fit", parents=[common], help="oscillation envelope of BMO symbols")
    c.add_argument("--symbol", type=_kv, action="append", help="kind=linear|log|const,... (repeatable)")

    c = sub.add_parser("verify-kernel", parents=[common], help="size/smoothness constants of a kernel")
    c.add_argument("--kernel", default="model", choices=["model", "pure-power", "zero"])
    c.add_argument("--scale", type=float, default=1.0)
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--samples", type=int, default=20000)
    c.add_argument("--radius", type=float, default=8.0)
    c.add_argument("--N", type=_floats, default=[2.0, 3.0, 4.0])

    c = sub.add_parser("verify-symbol", parents=[common], help="finite-difference class check of a symbol")
    c.add_argument("--symbol", default="model", choices=["model", "one", "order-one", "root-model"])
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--shells", type=int, default=10)
    c.add_argument("--per-shell", type=int, default=40)
    c.add_argument("--max-order", type=int, default=2)

    c = sub.add_parser("maximal", parents=[common], help="evaluate a maximal function on one test instance")
    c.add_argument("--op", default="frak", choices=["frak", "calM-loc", "m-loc", "m-sharp"])
    c.add_argument("--instance", type=int, default=0)
    c.add_argument("--format", default="csv", choices=["csv", "bin"])

    sub.add_parser("campaign", parents=[common], help="run the configured checks and write the report")
    return p


def _config(args) -> CampaignConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else CampaignConfig()
    d = cfg.to_dict()
    if getattr(args, "grid", None):
        d["grid"] = args.grid
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "out", None):
        d["output"] = args.out
    return CampaignConfig.from_dict(d)


def _write_rows(rows: list[dict], out) -> None:
    if not rows:
        return
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
    finally:
        if out:
            fh.close()


def _grid_of(cfg: CampaignConfig):
    g = cfg.grid
    return make_grid(int(g["n"]), float(g["L"]), int(g["G"]))


def cmd_certify_weight(args, cfg) -> int:
    grid = _grid_of(cfg)
    n = grid.n
    recs = [WeightRecipe.from_record(r, n) for r in (args.recipe or cfg.weights)]
    ps = args.p if args.p is not None else [float(p) for p in cfg.exponents][: len(recs)]
    if len(ps) == 1 and len(recs) > 1:
        ps = ps * len(recs)
    if len(ps) != len(recs):
        raise UsageError("give one exponent per recipe")
    fam = ball_family(grid)
    ws = [r.sample(grid) for r in recs]
    rows, ok = [], True
    for r, w, p in zip(recs, ws, ps):
        c = certify(w, p, fam)
        rows.append({**c.row(r.label(), p), "verdict": c.verdict})
        ok &= c.in_class
    if len(recs) > 1:
        c = certify(WeightVector(tuple(ws), tuple(ps)), None, fam)
        rows.append({**c.row(" & ".join(r.label() for r in recs), ps), "verdict": c.verdict})
        ok &= c.in_class
    _write_rows(rows, getattr(args, "out", None))
    return 0 if ok else 1


def cmd_bmo_fit(args, cfg) -> int:
    grid = _grid_of(cfg)
    fam = ball_family(grid)
    rows = []
    for rec in args.symbol or cfg.symbols:
        sym = symbol_from_recipe(rec, grid)
        fit = bmo_fit(sym, fam)
        rows.append({"symbol": json.dumps(rec, sort_keys=True), "C": fit.C, "theta": fit.theta,
                     "finite": math.isfinite(fit.C)})
    _write_rows(rows, getattr(args, "out", None))
    return 0 if all(r["finite"] for r in rows) else 1


def cmd_verify_kernel(args, cfg) -> int:
    n = int(cfg.grid["n"])
    K = kernel_from_config({"name": args.kernel, "scale": args.scale}, args.m, n)
    rng = np.random.default_rng(cfg.seed)
    y = random_samples(args.m, n, args.samples, args.radius, rng)
    h1 = verify_h1(K, y, args.N)
    h2 = verify_h2(K, random_h2_pairs(args.m, n, args.samples, args.radius, rng), args.N)
    rows = [{"test": "H1", **r} for r in h1.rows()] + [{"test": "H2", **r} for r in h2.rows()]
    _write_rows(rows, getattr(args, "out", None))
    return 1 if (h1.any_divergent or h2.any_divergent) else 0


def cmd_verify_symbol(args, cfg) -> int:
    n = int(cfg.grid["n"])
    a = symbol_from_config({"name": args.symbol}, args.m, n)
    rng = np.random.default_rng(cfg.seed)
    chk = symbol_class_check(a, class_samples(args.m, n, args.shells, args.per_shell, rng), args.max_order)
    rows = chk.rows()
    _write_rows(rows, getattr(args, "out", None))
    return 1 if any(r.get("divergent") for r in rows) else 0


def cmd_maximal(args, cfg) -> int:
    if not getattr(args, "out", None):
        raise UsageError("maximal needs --out")
    grid = _grid_of(cfg)
    fam = cfg.family
    insts = make_family(fam["kind"], max(int(fam["count"]), args.instance + 1), cfg.seed, cfg.m, grid.n, grid.L)
    fv = insts[args.instance].sample(grid)
    mx = cfg.maximal
    cover = critical_cover(grid)
    family = ball_family(grid)
    if args.op == "frak":
        out = frak_m(fv, MaximalParams(cfg.s, float(mx["kappa"]), mx.get("N"), mx.get("Kmax")), cover)
    elif args.op == "calM-loc":
        out = calM_loc(fv, cfg.s, cover, family)
    elif args.op == "m-loc":
        out = m_loc(fv[0], float(mx["alpha"]), family)
    else:
        out = m_sharp_loc(fv[0], float(mx["alpha"]), family)
    (write_grid_csv if args.format == "csv" else write_grid_binary)(out, args.out)
    return 0 if np.all(np.isfinite(out.values)) else 1


def cmd_campaign(args, cfg) -> int:
    out = cfg.output or "campaign.csv"
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        reports = run_campaign(cfg, progress=lambda r: print(r.summary(), flush=True))
    csv_path, json_path = emit_report(reports, out)
    print(f"wrote {csv_path} and {json_path}")
    return 0 if all(r.passed for r in reports) else 1


COMMANDS = {
    "certify-weight": cmd_certify_weight,
    "bmo-fit": cmd_bmo_fit,
    "verify-kernel": cmd_verify_kernel,
    "verify-symbol": cmd_verify_symbol,
    "maximal": cmd_maximal,
    "campaign": cmd_campaign,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError) as e:
        print(f"multicz: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"multicz: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
