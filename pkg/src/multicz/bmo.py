"""Mean oscillation with polynomial growth allowance and John-Nirenberg type checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import (
    Ball,
    BallFamily,
    GridFunction,
    GridSpec,
    GrowthFit,
    ball_mask,
    family_reduce,
    fit_growth,
)

__all__ = [
    "BmoSymbol",
    "SymbolVector",
    "oscillation",
    "oscillations",
    "bmo_fit",
    "symbol_from_recipe",
    "jn_power_constant",
    "jn_dilation_constant",
    "telescoping_gaps",
]


@dataclass(eq=False)
class BmoSymbol:
    b: GridFunction
    fitted: GrowthFit | None = None
    recipe: dict | None = None

    def __post_init__(self):
        if np.iscomplexobj(self.b.values):
            raise ValueError("BMO symbols must be real")

    @property
    def grid(self) -> GridSpec:
        return self.b.grid

    @property
    def norm(self) -> float:
        if self.fitted is None:
            raise ValueError("symbol has not been fitted")
        return self.fitted.C


@dataclass(eq=False)
class SymbolVector:
    symbols: tuple
    thetas: tuple = ()

    def __post_init__(self):
        self.symbols = tuple(self.symbols)
        if any(s.grid != self.symbols[0].grid for s in self.symbols):
            raise ValueError("symbols must share one grid")
        if not self.thetas and all(s.fitted for s in self.symbols):
            self.thetas = tuple(s.fitted.theta for s in self.symbols)

    @property
    def m(self) -> int:
        return len(self.symbols)

    @property
    def norm(self) -> float:
        return sum(s.norm for s in self.symbols)


def _centered_mean(v, valid):
    # Subtract the first in-ball sample before averaging so that constant
    # data has exactly zero deviation.
    ref = v[np.arange(len(v)), np.argmax(valid, axis=1)][:, None]
    cnt = valid.sum(axis=1)
    return ref[:, 0] + np.where(valid, v - ref, 0.0).sum(axis=1) / cnt, ref


def _osc(v, valid):
    mean, _ = _centered_mean(v, valid)
    return np.where(valid, np.abs(v - mean[:, None]), 0.0).sum(axis=1) / valid.sum(axis=1)


def oscillation(b: BmoSymbol | GridFunction, B: Ball) -> float:
    """``avg_B |b - b_B|``."""
    f = b.b if isinstance(b, BmoSymbol) else b
    mask = ball_mask(f.grid, B)
    if not mask.any():
        raise ValueError("ball misses grid")
    v = f.values[mask][None, :]
    return float(_osc(v, np.ones_like(v, bool))[0])


def oscillations(b: BmoSymbol | GridFunction, family: BallFamily) -> np.ndarray:
    f = b.b if isinstance(b, BmoSymbol) else b
    return family_reduce(family, [f.values], lambda g, valid: _osc(g[0], valid))


def bmo_fit(b: BmoSymbol, family: BallFamily) -> GrowthFit:
    """Envelope fit of the mean oscillation; stored on ``b.fitted``."""
    Q = oscillations(b, family)
    fit = fit_growth([(r, q) for r, row in zip(family.radii, Q) for q in row])
    b.fitted = fit
    return fit


def symbol_from_recipe(recipe: dict, grid: GridSpec) -> BmoSymbol:
    """``{"kind": "linear" | "log" | "const" | "user-grid", ...}``.

    linear: ``slope * x_1 + offset``; log: ``log(eps + |x - x0|) + offset``;
    user-grid: ``values`` given explicitly.
    """
    kind = recipe.get("kind")
    if kind == "linear":
        x1 = grid.mesh[..., 0]
        vals = float(recipe.get("slope", 1.0)) * x1 + float(recipe.get("offset", 0.0))
    elif kind == "log":
        vals = np.log(float(recipe.get("eps", 1e-3)) + grid.norm(recipe.get("x0", 0.0))) + float(recipe.get("offset", 0.0))
    elif kind == "const":
        vals = np.full(grid.shape, float(recipe.get("value", 0.0)))
    elif kind == "user-grid":
        vals = np.asarray(recipe["values"], float)
    else:
        raise ValueError(f"unknown symbol kind {kind!r}")
    return BmoSymbol(GridFunction(grid, vals), recipe=dict(recipe))


def jn_power_constant(b: BmoSymbol, family: BallFamily, s: float = 2.0) -> float:
    """Smallest C_JN with ``(avg_B |b - b_B|^s)^{1/s} <= C_JN * C (1 + r)^theta``."""
    fit = b.fitted or bmo_fit(b, family)

    def func(g, valid):
        mean, _ = _centered_mean(g[0], valid)
        dev = np.where(valid, np.abs(g[0] - mean[:, None]) ** s, 0.0).sum(axis=1) / valid.sum(axis=1)
        return dev ** (1.0 / s)

    lhs = family_reduce(family, [b.b.values], func)
    rhs = fit.bound(np.asarray(family.radii))[:, None]
    return _max_ratio(lhs, rhs)


def _max_ratio(lhs, rhs) -> float:
    lhs = np.asarray(lhs)
    rhs = np.broadcast_to(rhs, lhs.shape)
    if np.any((rhs == 0) & (lhs > 1e-12)):
        return math.inf
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(rhs > 0, lhs / rhs, 0.0)
    return float(r.max())


def jn_dilation_constant(b: BmoSymbol, family: BallFamily, ks: Sequence[int] = range(1, 6)) -> float:
    """Smallest C' with ``avg_{2^k B} |b - b_B| <= C' C k (1 + 2^k r)^theta``.

    Only dilates that stay inside the box (``2^k r <= L``) are used, and the
    family must have lattice centers.
    """
    if family.center_index is None:
        raise ValueError("dilation check needs lattice-centered balls")
    fit = b.fitted or bmo_fit(b, family)
    grid = family.grid
    vals = b.b.values.ravel()
    worst = 0.0
    for r in family.radii:
        base = None
        for sl, flat, valid in family.windows(r):
            mean, _ = _centered_mean(vals[flat], valid)
            base = mean if base is None else np.concatenate([base, mean])
        for k in ks:
            R = 2**k * r
            if R > grid.L * (1 + 1e-12):
                break
            lhs = []
            for sl, flat, valid in family.windows(R):
                v = vals[flat]
                lhs.append(np.where(valid, np.abs(v - base[sl, None]), 0.0).sum(axis=1) / valid.sum(axis=1))
            lhs = np.concatenate(lhs)
            rhs = fit.C * k * (1.0 + R) ** fit.theta
            worst = max(worst, _max_ratio(lhs, rhs))
    return worst


def telescoping_gaps(b: BmoSymbol, family: BallFamily) -> np.ndarray:
    """Per ball: ``|b_2B - b_B| - (|2B| / |B|) osc(b, 2B)``; all entries must be <= 0."""
    if family.center_index is None:
        raise ValueError("telescoping check needs lattice-centered balls")
    vals = b.b.values.ravel()

    def stats(r):
        mean, osc, cnt = [], [], []
        for sl, flat, valid in family.windows(r):
            mu, _ = _centered_mean(vals[flat], valid)
            mean.append(mu)
            osc.append(np.where(valid, np.abs(vals[flat] - mu[:, None]), 0.0).sum(axis=1) / valid.sum(axis=1))
            cnt.append(valid.sum(axis=1))
        return np.concatenate(mean), np.concatenate(osc), np.concatenate(cnt)

    rows = []
    for r in family.radii:
        m1, _, c1 = stats(r)
        m2, osc2, c2 = stats(2 * r)
        rows.append(np.abs(m2 - m1) - (c2 / c1) * osc2)
    return np.asarray(rows)
