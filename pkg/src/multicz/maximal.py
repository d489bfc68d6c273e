"""Critical-ball covers and the local / multilinear maximal operators.

Operators here take a ``BallFamily`` (finite stand-in for "all balls") or a
``CriticalCover`` (unit balls on a lattice of centers) and return a
``GridFunction``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import (
    Ball,
    BallFamily,
    GridFunction,
    GridSpec,
    _inside,
    family_reduce,
    sup_over_family,
)

__all__ = [
    "CriticalCover",
    "MaximalParams",
    "critical_cover",
    "m_loc",
    "m_sharp_loc",
    "frak_m",
    "frak_m_cover_values",
    "calM_s",
    "calM_loc",
    "scalar_loc",
]


@dataclass(frozen=True, eq=False)
class CriticalCover:
    grid: GridSpec
    centers: np.ndarray
    spacing: float
    multiplicity: np.ndarray = field(repr=False)
    overlap: dict = field(default_factory=dict)

    @property
    def balls(self) -> list[Ball]:
        return [Ball(c, 1.0) for c in self.centers]

    @property
    def overlap_constant(self) -> float:
        n = self.grid.n
        return max(v / s**n for s, v in self.overlap.items())

    def distances(self) -> np.ndarray:
        """|x - x_j| for every center; shape (J,) + grid.shape."""
        mesh = self.grid.mesh
        return np.sqrt(((mesh[None] - self.centers.reshape((-1,) + (1,) * self.grid.n + (self.grid.n,))) ** 2).sum(-1))

    def member_masks(self) -> np.ndarray:
        return _inside(self.distances(), 1.0)


def critical_cover(grid: GridSpec, spacing: float = 1.0, sigmas: Sequence[float] = (1, 2, 4, 8)) -> CriticalCover:
    """Unit balls centered on ``spacing * Z^n`` within ``[-L-1, L+1]^n``.

    ``spacing < 1`` gives a denser sublattice that better approximates the sup
    over all critical balls.
    """
    if spacing <= 0 or spacing > 1:
        raise ValueError("spacing must lie in (0, 1]")
    kmax = int(math.floor((grid.L + 1) / spacing + 1e-12))
    ax = np.arange(-kmax, kmax + 1) * spacing
    centers = np.stack(np.meshgrid(*([ax] * grid.n), indexing="ij"), -1).reshape(-1, grid.n)
    cover = CriticalCover(grid, centers, spacing, np.zeros(grid.shape, int), {})
    dist = cover.distances()
    mult = _inside(dist, 1.0).sum(axis=0)
    if mult.min() < 1:  # pragma: no cover - unit lattice always covers
        raise RuntimeError("critical cover misses grid points")
    overlap = {float(s): int(_inside(dist, float(s)).sum(axis=0).max()) for s in sigmas}
    return replace(cover, multiplicity=mult, overlap=overlap)


@dataclass(frozen=True)
class MaximalParams:
    """``s``: inner exponent, ``kappa``: dilation, ``N``: dyadic decay, ``Kmax``: truncation.

    ``N`` and ``Kmax`` default (via ``resolved``) to ``m n + n + 1`` and
    ``ceil(log2(2L / kappa)) + 1``.
    """

    s: float = 1.0
    kappa: float = 1.0
    N: float | None = None
    Kmax: int | None = None

    def resolved(self, m: int, grid: GridSpec) -> "MaximalParams":
        N = self.N if self.N is not None else m * grid.n + grid.n + 1
        K = self.Kmax if self.Kmax is not None else int(math.ceil(math.log2(2 * grid.L / self.kappa))) + 1
        if not N > 0:
            raise ValueError("N must be positive")
        if self.s <= 0 or self.kappa < 1:
            raise ValueError("need s > 0 and kappa >= 1")
        return MaximalParams(self.s, self.kappa, float(N), int(K))


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


def _masked_mean(v, valid):
    return np.where(valid, v, 0.0).sum(axis=1) / valid.sum(axis=1)


def _finish(out: np.ndarray, grid: GridSpec) -> GridFunction:
    if np.any(out == -np.inf):
        raise ValueError("family too sparse: some points lie in no admissible ball")
    return GridFunction(grid, out)


def _radius_cap(family: BallFamily, alpha: float) -> np.ndarray:
    sel = np.asarray(family.radii) <= alpha * (1 + 1e-12)
    if not sel.any():
        raise ValueError(f"family has no balls with radius <= {alpha}")
    return sel


def m_loc(f: GridFunction, alpha: float, family: BallFamily) -> GridFunction:
    """Local Hardy-Littlewood maximal function over balls of radius <= alpha."""
    sel = _radius_cap(family, alpha)
    means = family_reduce(family, [np.abs(_values(f))], lambda g, v: _masked_mean(g[0], v))
    return _finish(sup_over_family(means, family, sel), f.grid)


def m_sharp_loc(f: GridFunction, alpha: float, family: BallFamily) -> GridFunction:
    """Local sharp maximal function ``sup avg_B |f - f_B|`` over radii <= alpha."""
    from .bmo import _osc

    sel = _radius_cap(family, alpha)
    osc = family_reduce(family, [_values(f)], lambda g, v: _osc(g[0], v))
    return _finish(sup_over_family(osc, family, sel), f.grid)


def _s_average(vals: np.ndarray, mask: np.ndarray, s: float) -> float:
    return float(np.mean(vals[mask] ** s) ** (1.0 / s))


def frak_m_cover_values(fvec: Sequence[GridFunction], params: MaximalParams, cover: CriticalCover) -> np.ndarray:
    """Per cover ball: ``sum_k 2^{-Nk} prod_j (avg_{2^k kappa Q} |f_j|^s)^{1/s}``.

    Balls that contain no sample get NaN.
    """
    grid = cover.grid
    prm = params.resolved(len(fvec), grid)
    absf = [np.abs(_values(f)) for f in fvec]
    dist = cover.distances()
    out = np.full(len(cover.centers), np.nan)
    for q, d in enumerate(dist):
        if not _inside(d, 1.0).any():
            continue
        total = 0.0
        for k in range(prm.Kmax + 1):
            mask = _inside(d, 2**k * prm.kappa)
            term = 2.0 ** (-prm.N * k)
            for a in absf:
                term *= _s_average(a, mask, prm.s)
            total += term
        out[q] = total
    return out


def frak_m(fvec: Sequence[GridFunction], params: MaximalParams, cover: CriticalCover) -> GridFunction:
    """Critical-ball maximal function with dyadic-dilate tail sum."""
    grid = cover.grid
    vals = frak_m_cover_values(fvec, params, cover)
    members = cover.member_masks()
    out = np.full(grid.shape, -np.inf)
    for q, v in enumerate(vals):
        if np.isfinite(v):
            np.maximum(out, np.where(members[q], v, -np.inf), out=out)
    return _finish(out, grid)


def calM_s(fvec: Sequence[GridFunction], s: float, family: BallFamily) -> GridFunction:
    """Multilinear maximal function: sup over balls containing x of products of s-averages."""
    if not s > 0:
        raise ValueError("s must be positive")
    arrays = [np.abs(_values(f)) ** s for f in fvec]

    def func(g, valid):
        out = np.ones(valid.shape[0])
        for a in g:
            out = out * _masked_mean(a, valid) ** (1.0 / s)
        return out

    prod = family_reduce(family, arrays, func)
    return _finish(sup_over_family(prod, family), family.grid)


def calM_loc(fvec: Sequence[GridFunction], s: float, cover: CriticalCover, family: BallFamily) -> GridFunction:
    """``sum_k chi_{Q_k} calM_s(f chi_{8 Q_k})``; overlapping cover balls add up."""
    grid = cover.grid
    members = cover.member_masks()
    dist = cover.distances()
    out = np.zeros(grid.shape)
    for q in range(len(cover.centers)):
        if not members[q].any():
            continue
        trunc = _inside(dist[q], 8.0)
        local = calM_s([GridFunction(grid, np.where(trunc, _values(f), 0)) for f in fvec], s, family)
        out += np.where(members[q], local.values, 0.0)
    return GridFunction(grid, out)


def scalar_loc(f: GridFunction, s: float, cover: CriticalCover, family: BallFamily) -> GridFunction:
    """The m = 1 case of ``calM_loc``."""
    return calM_loc([f], s, cover, family)
