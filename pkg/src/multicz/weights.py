"""Growth weight classes: scalar and multiple-weight ball quantities and certificates.

The scalar ball quantity for ``p > 1`` is

    Q_p(w, B) = (avg_B w)^{1/p} (avg_B w^{-1/(p-1)})^{1/p'}

(the normalized form, equal to 1 for constant weights) and for ``p = 1`` it is
``avg_B w / min_B w``.  A weight is certified in the growth class when the
family of these quantities admits a finite envelope ``C (1 + r_B)^theta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import (
    Ball,
    BallFamily,
    DivergentQuantityError,
    GridFunction,
    GridSpec,
    GrowthFit,
    Weight,
    ball_family,
    ball_mask,
    family_reduce,
    fit_growth,
    make_grid,
)

__all__ = [
    "ExponentVector",
    "WeightVector",
    "WeightRecipe",
    "Certificate",
    "RefinedCertificate",
    "ap_quantity",
    "ap_quantities",
    "nu",
    "multi_ap_quantity",
    "multi_ap_quantities",
    "certify",
    "certify_refined",
    "reverse_holder_quantities",
    "characterization_certificates",
    "openness_certificate",
]


@dataclass(frozen=True)
class ExponentVector:
    ps: tuple

    def __post_init__(self):
        ps = tuple(float(p) for p in np.atleast_1d(self.ps))
        if not ps:
            raise ValueError("empty exponent vector")
        if any(not (1.0 <= p < math.inf) for p in ps):
            raise ValueError(f"exponents must lie in [1, inf): {ps}")
        object.__setattr__(self, "ps", ps)

    @property
    def m(self) -> int:
        return len(self.ps)

    @property
    def p(self) -> float:
        return 1.0 / sum(1.0 / q for q in self.ps)

    @property
    def conjugates(self) -> tuple:
        return tuple(math.inf if q == 1.0 else q / (q - 1.0) for q in self.ps)

    def scaled(self, r: float) -> "ExponentVector":
        return ExponentVector(tuple(r * q for q in self.ps))


def _as_exponents(p) -> ExponentVector:
    return p if isinstance(p, ExponentVector) else ExponentVector(tuple(np.atleast_1d(p)))


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: tuple
    exponents: ExponentVector

    def __post_init__(self):
        ws = tuple(self.weights)
        ex = _as_exponents(self.exponents)
        if len(ws) != ex.m:
            raise ValueError(f"{len(ws)} weights for {ex.m} exponents")
        if any(w.grid != ws[0].grid for w in ws):
            raise ValueError("weights must share one grid")
        ws = tuple(w if isinstance(w, Weight) else Weight(w.grid, w.values) for w in ws)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "exponents", ex)

    @property
    def grid(self) -> GridSpec:
        return self.weights[0].grid

    @property
    def m(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class WeightRecipe:
    """``w(x) = (eps0 + |x - x0|)^a (1 + |x|)^b``.

    ``b = 0`` with ``-n < a < n(p-1)`` gives classical A_p weights; ``b > 0``
    adds polynomial growth that only the growth classes tolerate.
    """

    eps0: float = 0.0
    x0: tuple = (0.0,)
    a: float = 0.0
    b: float = 0.0
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(c) for c in np.atleast_1d(self.x0)))
        if len(self.x0) == 1 and self.n == 2:
            object.__setattr__(self, "x0", self.x0 * 2)
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        if not self.a > -self.n:
            raise ValueError(f"a = {self.a} is not locally integrable (need a > -{self.n})")
        if self.b < 0:
            raise ValueError("b must be nonnegative")

    def sample(self, grid: GridSpec) -> Weight:
        d = grid.norm(self.x0)
        if self.eps0 == 0 and np.any(d == 0) and self.a != 0:
            raise ValueError("lattice hits the singular point x0; use eps0 > 0")
        with np.errstate(over="raise"):
            vals = (self.eps0 + d) ** self.a * (1.0 + grid.norm()) ** self.b
        return Weight(grid, vals)

    __call__ = sample

    def to_record(self) -> dict:
        return {"eps0": self.eps0, "x0": list(self.x0), "a": self.a, "b": self.b}

    @classmethod
    def from_record(cls, rec: dict, n: int = 1) -> "WeightRecipe":
        return cls(float(rec.get("eps0", 0.0)), tuple(np.atleast_1d(rec.get("x0", 0.0))), float(rec.get("a", 0.0)), float(rec.get("b", 0.0)), n)

    def label(self) -> str:
        x0 = ",".join(f"{c:g}" for c in self.x0)
        return f"eps0={self.eps0:g};x0={x0};a={self.a:g};b={self.b:g}"


# ---------------------------------------------------------------- quantities


def _mean(v, valid):
    cnt = valid.sum(axis=1)
    if np.any(cnt == 0):
        raise ValueError("ball misses grid")
    return np.where(valid, v, 0.0).sum(axis=1) / cnt


def _min(v, valid):
    return np.where(valid, v, np.inf).min(axis=1)


def _neg_power(w: np.ndarray, p: float) -> np.ndarray:
    """``w^{-1/(p-1)}`` with overflow mapped to +inf."""
    with np.errstate(over="ignore", divide="ignore"):
        return w ** (-1.0 / (p - 1.0))


def _dual_factor(w, p, valid, gathered):
    # (avg w^{1-p'})^{1/p'} or (min w)^{-1} when p == 1
    if p == 1.0:
        return 1.0 / _min(gathered, valid)
    with np.errstate(over="ignore", invalid="ignore"):
        return _mean(gathered, valid) ** ((p - 1.0) / p)


def ap_quantities(w: Weight, p: float, family: BallFamily) -> np.ndarray:
    """Q_p(w, B) for every ball of ``family``; shape (R, Nc)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    wv = w.values
    arrays = [wv] if p == 1.0 else [wv, _neg_power(wv, p)]

    def func(g, valid):
        head = _mean(g[0], valid) ** (1.0 / p)
        return head * _dual_factor(wv, p, valid, g[0] if p == 1.0 else g[1])

    with np.errstate(over="ignore", invalid="ignore"):
        return family_reduce(family, arrays, func)


def ap_quantity(w: Weight, p: float, B: Ball) -> float:
    """Normalized A_p-type quantity of ``w`` on the single ball ``B``.

    >>> from multicz.grid import make_grid, Ball
    >>> ap_quantity(Weight.ones(make_grid(1, 1, 16)), 3.0, Ball(0.0, 0.5))
    1.0
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    mask = ball_mask(w.grid, B)
    if not mask.any():
        raise ValueError("ball misses grid")
    wb = w.values[mask]
    head = np.mean(wb) ** (1.0 / p)
    if p == 1.0:
        return float(head / wb.min())
    with np.errstate(over="ignore", invalid="ignore"):
        return float(head * np.mean(_neg_power(wb, p)) ** ((p - 1.0) / p))


def nu(wvec: WeightVector) -> Weight:
    """Product weight ``prod_j w_j^{p/p_j}``."""
    p = wvec.exponents.p
    vals = np.ones(wvec.grid.shape)
    for w, pj in zip(wvec.weights, wvec.exponents.ps):
        vals = vals * w.values ** (p / pj)
    return Weight(wvec.grid, vals)


def multi_ap_quantities(wvec: WeightVector, family: BallFamily) -> np.ndarray:
    ex = wvec.exponents
    p = ex.p
    arrays = [nu(wvec).values]
    for w, pj in zip(wvec.weights, ex.ps):
        arrays.append(w.values if pj == 1.0 else _neg_power(w.values, pj))

    def func(g, valid):
        out = _mean(g[0], valid) ** (1.0 / p)
        for gj, pj in zip(g[1:], ex.ps):
            out = out * _dual_factor(None, pj, valid, gj)
        return out

    with np.errstate(over="ignore", invalid="ignore"):
        return family_reduce(family, arrays, func)


def multi_ap_quantity(wvec: WeightVector, B: Ball) -> float:
    """Multiple-weight quantity on one ball (``p_j = 1`` slots use ``1/min w_j``)."""
    mask = ball_mask(wvec.grid, B)
    if not mask.any():
        raise ValueError("ball misses grid")
    ex = wvec.exponents
    out = np.mean(nu(wvec).values[mask]) ** (1.0 / ex.p)
    with np.errstate(over="ignore", invalid="ignore"):
        for w, pj in zip(wvec.weights, ex.ps):
            wb = w.values[mask]
            if pj == 1.0:
                out = out / wb.min()
            else:
                out = out * np.mean(_neg_power(wb, pj)) ** ((pj - 1.0) / pj)
    return float(out)


# -------------------------------------------------------------- certificates


@dataclass(frozen=True, eq=False)
class Certificate:
    """Growth-envelope certificate over a tested ball family."""

    fit: GrowthFit | None
    argmax_ball: Ball | None
    in_class: bool
    sup_quantity: float
    quantities: np.ndarray = field(repr=False)

    @property
    def verdict(self) -> str:
        return "in tested class" if self.in_class else "NOT in tested class"

    def row(self, recipe: str, exponents) -> dict:
        ball = self.argmax_ball
        return {
            "recipe": recipe,
            "p": ";".join(f"{q:g}" for q in np.atleast_1d(exponents)),
            "C": self.fit.C if self.fit else math.inf,
            "theta": self.fit.theta if self.fit else math.inf,
            "argmax_ball": "" if ball is None else f"{':'.join(f'{c:g}' for c in ball.center)}@{ball.radius:g}",
        }


def _certify_quantities(Q: np.ndarray, family: BallFamily) -> Certificate:
    radii = np.asarray(family.radii)
    if not np.all(np.isfinite(Q)):
        ri, ci = np.unravel_index(np.argmax(~np.isfinite(Q)), Q.shape)
        return Certificate(None, Ball(family.centers[ci], radii[ri]), False, math.inf, Q)
    samples = [(r, q) for r, row in zip(radii, Q) for q in row]
    try:
        fit = fit_growth(samples)
    except DivergentQuantityError:  # pragma: no cover - guarded above
        return Certificate(None, None, False, math.inf, Q)
    scaled = Q / (1.0 + radii[:, None]) ** fit.theta
    ri, ci = np.unravel_index(np.argmax(scaled), Q.shape)
    return Certificate(fit, Ball(family.centers[ci], radii[ri]), True, float(Q.max()), Q)


def certify(w, p, family: BallFamily) -> Certificate:
    """Certify a ``Weight`` (scalar ``p``) or ``WeightVector`` on ``family``.

    Any infinite ball quantity (overflowing negative power) yields a
    certificate with ``in_class=False``.
    """
    if isinstance(w, WeightVector):
        if p is not None and _as_exponents(p) != w.exponents:
            w = WeightVector(w.weights, _as_exponents(p))
        Q = multi_ap_quantities(w, family)
    else:
        Q = ap_quantities(w, float(p), family)
    return _certify_quantities(Q, family)


@dataclass(frozen=True, eq=False)
class RefinedCertificate:
    certificates: tuple
    grids: tuple
    sup_quantities: tuple
    divergent: bool

    @property
    def in_class(self) -> bool:
        return not self.divergent and all(c.in_class for c in self.certificates)

    @property
    def verdict(self) -> str:
        return "in tested class" if self.in_class else "NOT in tested class"


def certify_refined(weight_fn, p, n: int, L: float, Gs: Sequence[int], radii: Sequence[float], stride_cells: float | None = None,
                    growth_tol: float = 1e-3, contraction: float = 0.9) -> RefinedCertificate:
    """Certify on a sequence of refined grids and flag divergence in ``G``.

    ``weight_fn(grid) -> Weight`` is sampled on each grid.  The sup of the ball
    quantity must converge: successive increments have to contract by at least
    ``contraction`` once the total growth exceeds ``growth_tol`` relative.
    Geometric contraction is what an integrable singularity produces; a
    logarithmically divergent average grows by near-constant increments.

    ``stride_cells`` sets the center spacing in units of the coarsest grid's h,
    so all levels test the same physical centers.
    """
    Gs = list(Gs)
    if len(Gs) < 3:
        raise ValueError("need at least three grid levels")
    certs, grids, sups = [], [], []
    for lvl, G in enumerate(Gs):
        grid = make_grid(n, L, G)
        stride = 1 if stride_cells is None else int(stride_cells * G // Gs[0])
        fam = ball_family(grid, radii, stride=max(stride, 1))
        cert = certify(weight_fn(grid), p, fam)
        certs.append(cert)
        grids.append(grid)
        sups.append(cert.sup_quantity)
    s = np.asarray(sups)
    divergent = not np.all(np.isfinite(s))
    if not divergent:
        inc = np.diff(s)
        grew = (s[-1] - s[0]) > growth_tol * abs(s[0])
        if grew and np.all(inc > 0):
            divergent = bool(np.any(inc[1:] >= contraction * inc[:-1]))
    return RefinedCertificate(tuple(certs), tuple(grids), tuple(sups), divergent)


# ---------------------------------------------------- structural properties


def reverse_holder_quantities(w: Weight, family: BallFamily, delta: float = 0.1) -> np.ndarray:
    """``(avg_B w^{1+delta})^{1/(1+delta)} / avg_B w`` per ball."""
    e = 1.0 + delta

    def func(g, valid):
        return _mean(g[1], valid) ** (1.0 / e) / _mean(g[0], valid)

    return family_reduce(family, [w.values, w.values**e], func)


def characterization_certificates(wvec: WeightVector, family: BallFamily) -> dict:
    """Scalar certificates for ``nu`` (at ``m p``) and each ``w_j^{1-p_j'}`` (at ``m p_j'``).

    Slots with ``p_j = 1`` have no dual weight and are omitted.
    """
    ex = wvec.exponents
    m = wvec.m
    out = {"nu": certify(nu(wvec), m * ex.p, family)}
    for j, (w, pj, pc) in enumerate(zip(wvec.weights, ex.ps, ex.conjugates)):
        if pj == 1.0:
            continue
        dual = Weight(w.grid, w.values ** (1.0 - pc))
        out[f"dual{j + 1}"] = certify(dual, m * pc, family)
    return out


def openness_certificate(wvec: WeightVector, family: BallFamily, r: float = 1.05) -> Certificate:
    ex = wvec.exponents
    if any(q <= r for q in ex.ps):
        raise ValueError("openness needs every p_j > r")
    return certify(WeightVector(wvec.weights, ex.scaled(1.0 / r)), None, family)
