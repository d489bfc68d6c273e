"""Run a configured list of checks and collect their reports."""
from __future__ import annotations

import copy
import json
from typing import Callable

from ..grid import make_grid
from ..weights import WeightRecipe
from . import checks as C
from .config import CampaignConfig, ConfigError
from .families import make_family

__all__ = ["run_campaign", "build_problem"]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(out.get(k), dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _recipes(records, n):
    return [WeightRecipe.from_record(r, n) for r in records]


def build_problem(cfg: CampaignConfig, op: C.Operator, weak: bool = False, exponents=None) -> C.Problem:
    n = int(cfg.grid["n"])
    tol = cfg.tolerances
    recs = (cfg.weak_weights or cfg.weights) if weak else cfg.weights
    exps = exponents if exponents is not None else (cfg.weak_exponents if weak else cfg.exponents)
    return C.Problem(op, _recipes(recs, n), tuple(exps), list(cfg.symbols), dict(cfg.maximal), float(cfg.s),
                     int(tol.get("refine", 2)), (float(tol["refine_low"]), float(tol["refine_high"])),
                     float(tol.get("zero", 1e-12)))


def _dispatch(cid: str, cfg: CampaignConfig, op: C.Operator, instances, grid, problems: dict):
    def prob(weak=False, exponents=None):
        key = (json.dumps({k: v for k, v in cfg.to_dict().items() if k != "checks"}, sort_keys=True),
               weak, None if exponents is None else tuple(exponents))
        if key not in problems:
            problems[key] = build_problem(cfg, op, weak, exponents)
        return problems[key]

    if cid == "strong":
        return C.check_strong(prob(), instances, grid)
    if cid == "weak":
        return C.check_weak(prob(weak=True), instances, grid)
    if cid == "commutator":
        return C.check_commutator(prob(), instances, grid)
    if cid.startswith("maximal:"):
        kind = cid.split(":", 1)[1]
        if kind == "loc-weak":
            return C.check_maximal(prob(weak=True), kind, instances, grid)
        if kind == "scalar-loc":
            return C.check_maximal(prob(True, [cfg.s] * cfg.m), kind, instances, grid)
        return C.check_maximal(prob(), kind, instances, grid)
    if cid in ("fs-local", "fs-local-weak"):
        return C.check_fs_local(prob(), instances, grid, weak=cid.endswith("weak"))
    if cid.startswith("pointwise:"):
        return C.check_pointwise(prob(), cid.split(":", 1)[1], instances, grid)
    raise ConfigError(f"unknown check id {cid!r}")  # pragma: no cover - validated upstream


def run_campaign(cfg: CampaignConfig, progress: Callable[[C.RatioReport], None] | None = None) -> list[C.RatioReport]:
    """Every check of ``cfg`` in config order; an empty check list gives an empty report."""
    items = cfg.check_list()
    base = cfg.to_dict()
    ops: dict = {}
    problems: dict = {}
    out = []
    for item in items:
        over = {k: v for k, v in item.items() if k != "id"}
        c = CampaignConfig.from_dict(_merge({k: v for k, v in base.items() if k != "checks"}, over)) if over else cfg
        g = c.grid
        n, L, G = int(g["n"]), float(g["L"]), int(g["G"])
        grid = make_grid(n, L, G)
        okey = (json.dumps(c.operator, sort_keys=True), c.m, n)
        if okey not in ops:
            try:
                ops[okey] = C.Operator.from_config(c.operator, c.m, n)
            except (KeyError, ValueError) as e:
                raise ConfigError(f"bad operator config: {e}") from None
        fam = c.family
        instances = make_family(fam["kind"], int(fam["count"]), int(c.seed), c.m, n, L)
        try:
            rep = _dispatch(item["id"], c, ops[okey], instances, grid, problems)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"check {item['id']}: {e}") from None
        rep.params.update({"family": dict(fam), "seed": int(c.seed), "L": L, "n": n})
        out.append(rep)
        if progress is not None:
            progress(rep)
    return out
