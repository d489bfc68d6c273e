"""Bounded-ratio experiments for the weighted inequalities.

Every check evaluates ``lhs / rhs`` per test instance on a grid and again on
the refined grid; a check passes when the max ratio is finite and the
refinement factor (max ratio at ``r G`` over max ratio at ``G``) lies inside
the configured band.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..bmo import bmo_fit, symbol_from_recipe
from ..czkernel import KernelSpec, apply_T, commutator_apply, kernel_from_config
from ..grid import GridFunction, GridSpec, ball_family, integrate, lp_norm, weak_lp_norm, _inside
from ..maximal import MaximalParams, calM_loc, critical_cover, frak_m, m_loc, m_sharp_loc, scalar_loc
from ..pseudo import BandWarning, SymbolSpec, apply_Ta, out_of_band_fraction, symbol_from_config
from ..weights import ExponentVector, WeightRecipe, WeightVector, certify, nu
from .families import Instance

__all__ = [
    "RatioReport",
    "Operator",
    "Problem",
    "Setting",
    "ratio_of",
    "check_strong",
    "check_weak",
    "check_commutator",
    "check_maximal",
    "check_fs_local",
    "fs_local_terms",
    "check_pointwise",
    "MAXIMAL_KINDS",
    "POINTWISE_KINDS",
]

MAXIMAL_KINDS = ("frak-strong", "loc-strong", "loc-weak", "scalar-loc")
POINTWISE_KINDS = ("P-critical", "P-sharp", "P-critical-comm", "P-sharp-comm")


@dataclass
class RatioReport:
    check_id: str
    instance_count: int
    max_ratio: float
    argmax: str
    lhs: float
    rhs: float
    G: int
    refinement_factor: float
    passed: bool
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    skipped: int = 0
    notes: list = field(default_factory=list)

    def summary(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.check_id}: max ratio {self.max_ratio:.4g} at {self.argmax or '-'}"
                f" (G={self.G}), refinement factor {self.refinement_factor:.4g}")


# ---------------------------------------------------------------- operators

class Operator:
    """The multilinear operator under test: a kernel (quadrature) or a symbol (DFT)."""

    def __init__(self, spec: KernelSpec | SymbolSpec):
        self.spec = spec
        self.kind = "kernel" if isinstance(spec, KernelSpec) else "symbol"
        self.band_warnings = 0
        self.max_out_of_band = 0.0
        self._memo: dict = {}

    def cached_apply(self, key, fvec: Sequence[GridFunction]) -> GridFunction:
        """``apply`` memoized on a caller-supplied key (instance identity and grid)."""
        if key not in self._memo:
            self._memo[key] = self.apply(fvec)
        return self._memo[key]

    @classmethod
    def from_config(cls, cfg: dict, m: int, n: int) -> "Operator":
        rest = {k: v for k, v in cfg.items() if k != "kind"}
        if cfg.get("kind", "kernel") == "kernel":
            return cls(kernel_from_config(rest, m, n))
        return cls(symbol_from_config(rest, m, n))

    @property
    def m(self) -> int:
        return self.spec.m

    def describe(self) -> dict:
        return {"kind": self.kind, **self.spec.describe()}

    def apply(self, fvec: Sequence[GridFunction]) -> GridFunction:
        if self.kind == "kernel":
            return apply_T(self.spec, fvec)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BandWarning)
            out = apply_Ta(self.spec, fvec)
        self.band_warnings += sum(issubclass(w.category, BandWarning) for w in caught)
        for f in fvec:
            self.max_out_of_band = max(self.max_out_of_band, out_of_band_fraction(f))
        return out

    def commutator(self, bvals: Sequence[np.ndarray], fvec: Sequence[GridFunction]) -> GridFunction:
        if self.kind == "kernel":
            return commutator_apply(self.spec, bvals, fvec)
        grid = fvec[0].grid
        Tf = self.apply(fvec).values
        total = np.zeros(grid.shape, complex)
        for j, b in enumerate(bvals):
            mod = list(fvec)
            mod[j] = GridFunction(grid, b * fvec[j].values)
            total += b * Tf - self.apply(mod).values
        return GridFunction(grid, total)


# ---------------------------------------------------------------- problem setup

@dataclass(eq=False)
class Setting:
    """Everything a check needs on one grid."""

    grid: GridSpec
    weights: list
    wvec: WeightVector
    nu: GridFunction
    family: object
    cover: object
    symbols: list
    memo: dict = field(default_factory=dict)

    @property
    def bvals(self) -> list[np.ndarray]:
        return [s.b.values for s in self.symbols]

    @property
    def bnorm(self) -> float:
        return float(sum(s.norm for s in self.symbols))

    def cached(self, key, fn: Callable):
        if key not in self.memo:
            self.memo[key] = fn()
        return self.memo[key]


@dataclass(eq=False)
class Problem:
    """Operator, weights, exponents and maximal-function parameters of a campaign."""

    op: Operator
    weights: list
    exponents: tuple
    symbols: list = field(default_factory=lambda: [{"kind": "const", "value": 0.0}] * 2)
    maximal: dict = field(default_factory=dict)
    s: float = 1.0
    refine: int = 2
    band: tuple = (0.5, 2.0)
    zero: float = 1e-12
    _settings: dict = field(default_factory=dict, repr=False)
    _samples: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.exponents = tuple(float(p) for p in self.exponents)
        self.weights = [w if isinstance(w, WeightRecipe) or callable(w) else WeightRecipe.from_record(w)
                        for w in self.weights]
        if len(self.exponents) != len(self.weights):
            raise ValueError("one exponent per weight")

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def p(self) -> float:
        return ExponentVector(self.exponents).p

    def with_exponents(self, exponents, weights=None) -> "Problem":
        return Problem(self.op, list(weights if weights is not None else self.weights), tuple(exponents),
                       self.symbols, self.maximal, self.s, self.refine, self.band, self.zero)

    def params(self) -> MaximalParams:
        mx = self.maximal
        return MaximalParams(self.s, float(mx.get("kappa", 1.0)), mx.get("N"), mx.get("Kmax"))

    def at(self, grid: GridSpec) -> Setting:
        key = (grid.n, grid.L, grid.G)
        if key not in self._settings:
            ws = [w.sample(grid) if isinstance(w, WeightRecipe) else w(grid) for w in self.weights]
            wvec = WeightVector(tuple(ws), ExponentVector(self.exponents))
            fam = ball_family(grid)
            syms = []
            for rec in self.symbols:
                sym = symbol_from_recipe(rec, grid)
                bmo_fit(sym, fam)
                syms.append(sym)
            self._settings[key] = Setting(grid, ws, wvec, nu(wvec), fam, critical_cover(grid), syms)
        return self._settings[key]

    def sample(self, inst: Instance, grid: GridSpec) -> list[GridFunction]:
        key = (inst.key, grid.n, grid.L, grid.G)
        if key not in self._samples:
            self._samples[key] = inst.sample(grid)
        return self._samples[key]

    def T(self, st: Setting, inst: Instance) -> GridFunction:
        fv = self.sample(inst, st.grid)
        return self.op.cached_apply((inst.key, st.grid.n, st.grid.L, st.grid.G), fv)

    def weight_labels(self) -> list:
        return [w.label() if isinstance(w, WeightRecipe) else getattr(w, "__name__", "custom") for w in self.weights]


def ratio_of(lhs: float, rhs: float, zero: float = 1e-12) -> float:
    """``lhs / rhs`` with ``0/0 -> 0`` and ``x/0 -> inf``."""
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        return math.inf
    if lhs <= zero:
        return 0.0
    if rhs <= 0:
        return math.inf
    return lhs / rhs


def _weights_cert(prob: Problem, st: Setting, exps) -> dict:
    c = certify(WeightVector(st.wvec.weights, ExponentVector(tuple(exps))), None, st.family)
    return {"C": c.fit.C if c.fit else math.inf, "theta": c.fit.theta if c.fit else math.inf, "in_class": c.in_class}


def _denominator(fv, exps, weights) -> float:
    out = 1.0
    for f, p, w in zip(fv, exps, weights):
        out *= lp_norm(f, p, w)
    return out


def _run(check_id: str, prob: Problem, instances: Sequence[Instance], grid: GridSpec,
         per_instance: Callable, params: dict, certs: Callable | None = None) -> RatioReport:
    """Evaluate on ``grid`` and its refinement; ``per_instance(st, inst) -> (lhs, rhs) | None``."""
    rows, maxes, best = [], [], None
    skipped = 0
    notes = []
    cert_ok = True
    grids = [grid, grid.refine(prob.refine)]
    for lvl, g in enumerate(grids):
        st = prob.at(g)
        if certs is not None:
            cinfo = certs(st)
            params.setdefault("certificates", {})[str(g.G)] = cinfo
            cert_ok &= bool(cinfo.get("in_class", True))
        top = None
        for inst in instances:
            res = per_instance(st, inst)
            if res is None:
                if lvl == 0:
                    skipped += 1
                continue
            lhs, rhs = (float(v) for v in res)
            r = ratio_of(lhs, rhs, prob.zero)
            rows.append({"G": g.G, "instance_id": inst.describe(), "lhs": lhs, "rhs": rhs, "ratio": r})
            if top is None or r > top[0]:
                top = (r, inst.describe(), lhs, rhs)
        maxes.append(top[0] if top else 0.0)
        if lvl == 0:
            best = top
    base, fine = maxes
    if base <= prob.zero and fine <= prob.zero:
        factor = 1.0
    elif base <= prob.zero or not math.isfinite(base):
        factor = math.inf
    else:
        factor = fine / base
    lo, hi = prob.band
    passed = bool(best is not None and math.isfinite(base) and math.isfinite(fine) and lo <= factor <= hi and cert_ok)
    if not cert_ok:
        notes.append("weight certificate not in tested class")
    if best is None:
        notes.append("all instances skipped")
        best = (0.0, "", 0.0, 0.0)
        passed = False
    if prob.op.kind == "symbol":
        params["max_input_out_of_band"] = max(
            (out_of_band_fraction(f) for inst in instances for f in prob.sample(inst, grid)), default=0.0)
    params = {"op": prob.op.describe(), "refine": prob.refine, **params}
    return RatioReport(check_id, len(instances), best[0], best[1], best[2], best[3], grid.G, factor, passed,
                       params, rows, skipped, notes)


def _base_params(prob: Problem, exps=None) -> dict:
    return {"exponents": list(exps or prob.exponents), "weights": prob.weight_labels()}


def _require_strong(exps):
    if any(p <= 1 for p in exps):
        raise ValueError("strong-type checks need every p_j > 1")


# ---------------------------------------------------------------- checks

def check_strong(prob: Problem, instances: Sequence[Instance], grid: GridSpec) -> RatioReport:
    """``||T f||_{L^p(nu)} / prod ||f_j||_{L^{p_j}(w_j)}``."""
    _require_strong(prob.exponents)
    p = prob.p

    def one(st, inst):
        fv = prob.sample(inst, st.grid)
        den = _denominator(fv, prob.exponents, st.weights)
        if den == 0:
            return None
        return lp_norm(prob.T(st, inst), p, st.nu), den

    return _run("strong", prob, instances, grid, one, _base_params(prob),
                lambda st: _weights_cert(prob, st, prob.exponents))


def check_weak(prob: Problem, instances: Sequence[Instance], grid: GridSpec) -> RatioReport:
    """``||T f||_{L^{p,inf}(nu)} / prod ||f_j||_{L^{p_j}(w_j)}`` with some ``p_j = 1``."""
    if not any(p == 1 for p in prob.exponents):
        raise ValueError("weak-type check needs some p_j = 1")
    p = prob.p

    def one(st, inst):
        fv = prob.sample(inst, st.grid)
        den = _denominator(fv, prob.exponents, st.weights)
        if den == 0:
            return None
        return weak_lp_norm(prob.T(st, inst), p, st.nu), den

    params = _base_params(prob)
    params["assumption"] = "weights required to carry a growth-class certificate for the weak-type bound"
    return _run("weak", prob, instances, grid, one, params, lambda st: _weights_cert(prob, st, prob.exponents))


def _bmo_params(st: Setting) -> dict:
    return {"C": [s.fitted.C for s in st.symbols], "theta": [s.fitted.theta for s in st.symbols]}


def check_commutator(prob: Problem, instances: Sequence[Instance], grid: GridSpec) -> RatioReport:
    """``||T_b f||_{L^p(nu)} / prod ||f_j||_{L^{p_j}(w_j)}``."""
    _require_strong(prob.exponents)
    p = prob.p

    def one(st, inst):
        fv = prob.sample(inst, st.grid)
        den = _denominator(fv, prob.exponents, st.weights)
        if den == 0:
            return None
        Tb = st.cached(("Tb", inst.key), lambda: prob.op.commutator(st.bvals, fv))
        return lp_norm(Tb, p, st.nu), den

    def certs(st):
        out = _weights_cert(prob, st, prob.exponents)
        out["bmo"] = _bmo_params(st)
        return out

    params = _base_params(prob)
    params["symbols"] = list(prob.symbols)
    return _run("commutator", prob, instances, grid, one, params, certs)


def _frak(prob, st, inst, s, kappa=None):
    prm = prob.params()
    prm = MaximalParams(s, prm.kappa if kappa is None else kappa, prm.N, prm.Kmax)
    fv = prob.sample(inst, st.grid)
    return st.cached(("frak", s, prm.kappa, inst.key), lambda: frak_m(fv, prm, st.cover))


def _calM_loc(prob, st, inst, s):
    fv = prob.sample(inst, st.grid)
    return st.cached(("calMloc", s, inst.key), lambda: calM_loc(fv, s, st.cover, st.family))


def check_maximal(prob: Problem, kind: str, instances: Sequence[Instance], grid: GridSpec) -> RatioReport:
    """Weighted bounds for the critical, local multilinear and scalar local maximal functions.

    ``frak-strong``/``loc-strong`` use the strong exponents of ``prob``;
    ``loc-weak`` and ``scalar-loc`` expect ``prob`` to carry exponents equal
    to ``s`` (the endpoint).
    """
    if kind not in MAXIMAL_KINDS:
        raise ValueError(f"unknown maximal kind {kind!r}")
    s = prob.s
    exps = prob.exponents
    p = prob.p
    if kind == "frak-strong" and any(q < s for q in exps):
        raise ValueError("frak-strong needs p_j >= s")
    if kind == "loc-strong" and any(q <= s for q in exps):
        raise ValueError("loc-strong needs p_j > s")
    if kind == "loc-weak" and any(q < s for q in exps):
        raise ValueError("loc-weak needs p_j >= s")
    if kind == "scalar-loc" and exps[0] != s:
        raise ValueError("scalar-loc needs p_1 = s")

    def one(st, inst):
        fv = prob.sample(inst, st.grid)
        if kind == "scalar-loc":
            den = lp_norm(fv[0], s, st.weights[0])
            if den == 0:
                return None
            g = st.cached(("scalar", s, inst.key),
                          lambda: scalar_loc(fv[0], s, st.cover, st.family))
            return weak_lp_norm(g, s, st.weights[0]), den
        den = _denominator(fv, exps, st.weights)
        if den == 0:
            return None
        if kind == "frak-strong":
            return lp_norm(_frak(prob, st, inst, s), p, st.nu), den
        M = _calM_loc(prob, st, inst, s)
        if kind == "loc-strong":
            return lp_norm(M, p, st.nu), den
        return weak_lp_norm(M, p, st.nu), den

    def certs(st):
        if kind == "scalar-loc":
            c = certify(st.weights[0], 1.0, st.family)
            return {"C": c.fit.C if c.fit else math.inf, "theta": c.fit.theta if c.fit else math.inf,
                    "in_class": c.in_class}
        return _weights_cert(prob, st, [q / s for q in exps])

    prm = prob.params().resolved(prob.m, grid)
    params = _base_params(prob)
    params.update({"s": s, "kappa": prm.kappa, "N": prm.N, "Kmax": prm.Kmax})
    return _run(f"maximal:{kind}", prob, instances, grid, one, params, certs)


def _two_q_sum(g_abs: np.ndarray, w: GridFunction, cover, p: float) -> float:
    tot = 0.0
    for d in cover.distances():
        if not _inside(d, 1.0).any():
            continue
        mask = _inside(d, 2.0)
        tot += integrate(w, mask) * float(np.mean(g_abs[mask])) ** p
    return tot


def fs_local_terms(g: GridFunction, w: GridFunction, p: float, beta: float, cover, family,
                   weak: bool = False) -> tuple[float, float]:
    """Both sides of the local Fefferman-Stein inequality for one ``g``.

    Strong form: ``int (M_loc,beta g)^p w`` against
    ``int (M#_loc,4 g)^p w + sum_k w(2Q_k) (avg_2Q_k |g|)^p``; the weak form
    replaces both integrals by ``||.||^p_{L^{p,inf}(w)}``.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    g = GridFunction(g.grid, np.abs(g.values))
    norm = weak_lp_norm if weak else lp_norm
    lhs = norm(m_loc(g, beta, family), p, w) ** p
    sharp = norm(m_sharp_loc(g, 4.0, family), p, w) ** p
    return lhs, sharp + _two_q_sum(g.values, w, cover, p)


def check_fs_local(prob: Problem, instances: Sequence[Instance], grid: GridSpec, weak: bool = False,
                   beta: float | None = None, p: float | None = None) -> RatioReport:
    """Local Fefferman-Stein ratio with ``g = |T f|`` and ``w = nu``."""
    beta = float(prob.maximal.get("beta", 1.0) if beta is None else beta)
    p = prob.p if p is None else float(p)

    def one(st, inst):
        return fs_local_terms(prob.T(st, inst), st.nu, p, beta, st.cover, st.family, weak)

    def certs(st):
        c = certify(st.nu, 16.0, st.family)
        return {"C": c.fit.C if c.fit else math.inf, "theta": c.fit.theta if c.fit else math.inf, "in_class": c.in_class,
                "p_cert": 16.0}

    params = _base_params(prob)
    params.update({"beta": beta, "p": p})
    return _run("fs-local-weak" if weak else "fs-local", prob, instances, grid, one, params, certs)


def _per_ball_ratio(u_lhs: np.ndarray, delta: float, rhs_field: np.ndarray, cover, zero: float, scale: float = 1.0):
    best = None
    for d in cover.distances():
        if not _inside(d, 1.0).any():
            continue
        mask = _inside(d, 2.0)
        lhs = float(np.mean(u_lhs[mask])) ** (1.0 / delta)
        rhs = scale * float(rhs_field[mask].min())
        r = ratio_of(lhs, rhs, zero)
        if best is None or r > best[0]:
            best = (r, lhs, rhs)
    return best


def _pointwise_max(lhs: np.ndarray, rhs: np.ndarray, zero: float):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(lhs <= zero, 0.0, np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.inf))
    i = int(np.argmax(r))
    return float(r.flat[i]), float(lhs.flat[i]), float(rhs.flat[i])


def check_pointwise(prob: Problem, kind: str, instances: Sequence[Instance], grid: GridSpec) -> RatioReport:
    """Pointwise and per-critical-ball estimates for ``T`` and its commutator."""
    if kind not in POINTWISE_KINDS:
        raise ValueError(f"unknown pointwise kind {kind!r}")
    mx = prob.maximal
    m = prob.m
    delta = float(mx.get("delta", 0.25))
    if not 0 < delta < 1.0 / m:
        raise ValueError("need 0 < delta < 1/m")
    p_in = float(mx.get("p_inner", 2.0))
    s_sh = float(mx.get("s_sharp", 0.4))
    if kind.endswith("comm") and not p_in > 1:
        raise ValueError("commutator bounds need an inner exponent p > 1")
    if kind == "P-sharp-comm" and not delta < s_sh < 1.0 / m:
        raise ValueError("need delta < s < 1/m")
    zero = prob.zero

    def one(st, inst):
        fv = prob.sample(inst, st.grid)
        if kind in ("P-critical", "P-sharp"):
            U = np.abs(prob.T(st, inst).values)
        else:
            U = np.abs(st.cached(("Tb", inst.key),
                                 lambda: prob.op.commutator(st.bvals, fv)).values)
        if kind == "P-critical":
            F = _frak(prob, st, inst, 1.0, 1.0).values
            r, lhs, rhs = _per_ball_ratio(U**delta, delta, F, st.cover, zero)
            return lhs, rhs
        if kind == "P-critical-comm":
            F = _frak(prob, st, inst, p_in, 1.0).values
            r, lhs, rhs = _per_ball_ratio(U**delta, delta, F, st.cover, zero, st.bnorm)
            return lhs, rhs
        lhs = m_sharp_loc(GridFunction(st.grid, U**delta), 4.0, st.family).values ** (1.0 / delta)
        if kind == "P-sharp":
            rhs = _frak(prob, st, inst, 1.0, 1.0).values + _calM_loc(prob, st, inst, 1.0).values
        else:
            Tf = GridFunction(st.grid, np.abs(prob.T(st, inst).values))
            Ms = st.cached(("scalarT", s_sh, inst.key),
                           lambda: scalar_loc(Tf, s_sh, st.cover, st.family)).values
            rhs = st.bnorm * (Ms + _frak(prob, st, inst, p_in, 1.0).values + _calM_loc(prob, st, inst, p_in).values)
        r, l, rr = _pointwise_max(lhs, rhs, zero)
        return l, rr

    params = {"delta": delta}
    if kind.endswith("comm"):
        params.update({"p_inner": p_in, "symbols": list(prob.symbols)})
    if kind == "P-sharp-comm":
        params["s"] = s_sh
    prm = prob.params().resolved(m, grid)
    params.update({"N": prm.N, "Kmax": prm.Kmax})
    certs = (lambda st: {"in_class": True, "bmo": _bmo_params(st)}) if kind.endswith("comm") else None
    return _run(f"pointwise:{kind}", prob, instances, grid, one, params, certs)
