"""Uniform box lattices, midpoint quadrature, balls and weighted Lebesgue norms.

Everything downstream works on a box ``[-L, L)^n`` sampled at cell midpoints
``x_i = -L + (i + 1/2) h`` with ``h = 2L/G``.  Balls are open, clipped to the
box, and the clipped sample count times ``h^n`` is used as ``|B|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import ndimage

__all__ = [
    "GridSpec",
    "GridFunction",
    "Weight",
    "Ball",
    "BallFamily",
    "GrowthFit",
    "DivergentQuantityError",
    "make_grid",
    "integrate",
    "measure",
    "ball_mask",
    "ball_average",
    "lp_norm",
    "weak_lp_norm",
    "ball_family",
    "centered_family",
    "annulus_mask",
    "family_reduce",
    "family_means",
    "sup_over_family",
    "fit_growth",
]

# Shrinks every ball by a relative 1e-12 so that lattice points sitting exactly
# on a sphere of radius k*h are consistently excluded.
_BALL_RTOL = 1e-12
_CHUNK = 1 << 21


class DivergentQuantityError(ValueError):
    """Raised when a per-ball quantity is infinite or NaN."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    L: float
    G: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.G

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.G,) * self.n

    @property
    def size(self) -> int:
        return self.G**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def axis(self) -> np.ndarray:
        # (i + 1/2 - G/2) is exact, so the lattice is exactly antisymmetric.
        return (np.arange(self.G) + 0.5 - self.G / 2) * self.h

    @property
    def x(self) -> np.ndarray:
        """Coordinates with shape ``shape`` for ``n == 1``, else ``shape + (n,)``."""
        if self.n == 1:
            return self.axis
        return self.mesh

    @property
    def mesh(self) -> np.ndarray:
        axes = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def points(self) -> np.ndarray:
        return self.mesh.reshape(-1, self.n)

    def norm(self, center=None) -> np.ndarray:
        """|x - center| on the lattice."""
        c = np.zeros(self.n) if center is None else np.broadcast_to(np.asarray(center, float), (self.n,))
        return np.sqrt(((self.mesh - c) ** 2).sum(axis=-1))

    def sample(self, fn) -> "GridFunction":
        return GridFunction(self, fn(self.x))

    def coords_to_index(self, pts) -> np.ndarray:
        """Nearest lattice index for coordinates of shape (..., n)."""
        pts = np.asarray(pts, float)
        return np.rint((pts + self.L) / self.h - 0.5).astype(np.int64)

    def refine(self, factor: int = 2) -> "GridSpec":
        return make_grid(self.n, self.L, self.G * factor)


def make_grid(n: int, L: float, G: int) -> GridSpec:
    """Build a ``GridSpec`` on ``[-L, L)^n`` with ``G`` midpoints per axis.

    Examples
    --------
    >>> g = make_grid(1, 8, 256)
    >>> g.h, g.axis[0]
    (0.0625, -7.96875)
    """
    if n not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {n}")
    if int(G) != G or G < 16 or (int(G) & (int(G) - 1)):
        raise ValueError(f"G not a power of two >= 16: {G}")
    if not L > 0:
        raise ValueError(f"half-width must be positive, got {L}")
    return GridSpec(int(n), float(L), int(G))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled scalar field; ``values`` has shape ``grid.shape``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite samples")
        object.__setattr__(self, "values", v)

    # arithmetic keeps the grid and returns plain GridFunctions
    def _wrap(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))

    def __pow__(self, p):
        return self._wrap(self.values**p)

    @property
    def real(self) -> "GridFunction":
        return self._wrap(self.values.real)

    def max(self) -> float:
        return float(np.max(np.abs(self.values)))


class Weight(GridFunction):
    """Strictly positive real grid function used as a measure density."""

    def __post_init__(self):
        super().__post_init__()
        if np.iscomplexobj(self.values):
            raise ValueError("weights must be real")
        if not np.all(self.values > 0):
            raise ValueError("weights must be strictly positive")

    @classmethod
    def ones(cls, grid: GridSpec) -> "Weight":
        return cls(grid, np.ones(grid.shape))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    def dilate(self, lam: float) -> "Ball":
        return Ball(self.center, lam * self.radius)


def _inside(dist, radius):
    return dist < radius * (1.0 - _BALL_RTOL)


def ball_mask(grid: GridSpec, ball: Ball) -> np.ndarray:
    return _inside(grid.norm(ball.center), ball.radius)


def _weights_or_one(w):
    return 1.0 if w is None else (w.values if isinstance(w, GridFunction) else np.asarray(w))


def integrate(f: GridFunction, mask=None) -> float:
    """Midpoint rule ``sum(f) * h^n`` over ``mask`` (boolean array or index set)."""
    v = f.values
    if mask is not None:
        v = v[mask]
    return np.sum(v) * f.grid.cell_volume


def measure(grid: GridSpec, mask=None) -> float:
    if mask is None:
        return grid.size * grid.cell_volume
    m = np.asarray(mask)
    count = int(m.sum()) if m.dtype == bool else len(np.unique(m))
    return count * grid.cell_volume


def ball_average(f: GridFunction, B: Ball):
    mask = ball_mask(f.grid, B)
    if not mask.any():
        raise ValueError("ball misses grid")
    return np.mean(f.values[mask])


def lp_norm(f: GridFunction, p: float, w=None) -> float:
    if not p > 0:
        raise ValueError(f"exponent must be positive, got {p}")
    dens = np.abs(f.values) ** p * _weights_or_one(w)
    return float((np.sum(dens) * f.grid.cell_volume) ** (1.0 / p))


def weak_lp_norm(f: GridFunction, p: float, w=None) -> float:
    """``sup_lambda lambda * w({|f| > lambda})^{1/p}`` on the lattice.

    The sup of the step-function distribution is attained just below each
    distinct value of ``|f|``; those levels are ``v * (1 - 1e-9)``.
    """
    if not p > 0:
        raise ValueError(f"exponent must be positive, got {p}")
    a = np.abs(f.values).ravel()
    wt = np.broadcast_to(_weights_or_one(w), f.grid.shape).ravel() * f.grid.cell_volume
    order = np.argsort(a, kind="stable")
    a, wt = a[order], wt[order]
    # tail[i] = sum of weights of entries i.. (entries sorted ascending)
    tail = np.concatenate([np.cumsum(wt[::-1])[::-1], [0.0]])
    levels = np.unique(a)
    levels = levels[levels > 0] * (1.0 - 1e-9)
    if levels.size == 0:
        return 0.0
    first_above = np.searchsorted(a, levels, side="right")
    mass = tail[first_above]
    return float(np.max(levels * mass ** (1.0 / p)))


@dataclass(frozen=True, eq=False)
class BallFamily:
    """Finite set of balls: every center paired with every radius.

    ``center_index`` is set when the centers are lattice points, which enables
    the translation-invariant footprint path; otherwise each ball is masked
    individually.
    """

    grid: GridSpec
    centers: np.ndarray
    radii: tuple
    stride: int | None = None
    center_index: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.radii) == 0:
            raise ValueError("empty radius set")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "centers", np.atleast_2d(np.asarray(self.centers, float)))

    def __len__(self) -> int:
        return len(self.centers) * len(self.radii)

    @property
    def balls(self) -> list[Ball]:
        return [Ball(c, r) for r in self.radii for c in self.centers]

    @property
    def provenance(self) -> dict:
        return {"stride": self.stride, "radii": list(self.radii)}

    def windows(self, radius: float) -> Iterator[tuple[slice, np.ndarray, np.ndarray]]:
        """Yield ``(center_slice, flat_index, valid)`` chunks for one radius.

        ``flat_index[c, k]`` is the k-th lattice sample of ball c (padded
        entries point at sample 0 and are ``False`` in ``valid``).
        """
        grid = self.grid
        if self.center_index is not None:
            off = _offsets(grid, radius)
            step = max(1, _CHUNK // max(len(off), 1))
            for start in range(0, len(self.centers), step):
                sl = slice(start, min(start + step, len(self.centers)))
                pos = self.center_index[sl, None, :] + off[None, :, :]
                valid = np.all((pos >= 0) & (pos < grid.G), axis=-1)
                flat = np.ravel_multi_index(tuple(np.clip(pos, 0, grid.G - 1).transpose(2, 0, 1)), grid.shape)
                yield sl, flat, valid
        else:
            lists = [np.flatnonzero(_inside(grid.norm(c), radius)) for c in self.centers]
            width = max(1, max(len(x) for x in lists))
            flat = np.zeros((len(lists), width), dtype=np.int64)
            valid = np.zeros((len(lists), width), dtype=bool)
            for i, idx in enumerate(lists):
                flat[i, : len(idx)] = idx
                valid[i, : len(idx)] = True
            yield slice(0, len(lists)), flat, valid

    def footprint(self, radius: float) -> np.ndarray:
        R = int(np.ceil(radius / self.grid.h))
        d = np.arange(-R, R + 1)
        dd = np.meshgrid(*([d] * self.grid.n), indexing="ij")
        dist = np.sqrt(sum(x**2 for x in dd)) * self.grid.h
        return _inside(dist, radius)


def _offsets(grid: GridSpec, radius: float) -> np.ndarray:
    R = int(np.ceil(radius / grid.h))
    d = np.arange(-R, R + 1)
    dd = np.stack(np.meshgrid(*([d] * grid.n), indexing="ij"), axis=-1).reshape(-1, grid.n)
    keep = _inside(np.sqrt((dd**2).sum(axis=1)) * grid.h, radius)
    return dd[keep]


def _default_radii(grid: GridSpec) -> list[float]:
    radii, r = [], grid.h
    while r <= 2 * grid.L * (1 + 1e-12):
        radii.append(r)
        r *= 2
    return radii


def ball_family(grid: GridSpec, radii: Sequence[float] | None = None, stride: int = 1) -> BallFamily:
    """Balls centered at every ``stride``-th lattice point, one per radius.

    Default radii are ``h * 2^j`` up to the box diameter ``2L``.
    """
    if radii is None:
        radii = _default_radii(grid)
    radii = sorted(float(r) for r in radii)
    if not radii:
        raise ValueError("empty radius set")
    if stride < 1 or grid.G % stride:
        raise ValueError(f"stride {stride} must divide G={grid.G}")
    idx1 = np.arange(0, grid.G, stride)
    idx = np.stack(np.meshgrid(*([idx1] * grid.n), indexing="ij"), axis=-1).reshape(-1, grid.n)
    centers = grid.axis[idx]
    return BallFamily(grid, centers, tuple(radii), stride, idx)


def centered_family(grid: GridSpec, radii: Sequence[float], centers=None) -> BallFamily:
    """Balls at arbitrary (not necessarily lattice) centers; default is the origin."""
    if centers is None:
        centers = np.zeros((1, grid.n))
    return BallFamily(grid, np.atleast_2d(centers), tuple(sorted(radii)))


def annulus_mask(B: Ball, j: int, grid: GridSpec) -> np.ndarray:
    """Samples of ``S_j(B) = 2^j B minus 2^{j-1} B`` (``S_0 = B``)."""
    if j < 0:
        raise ValueError("annulus index must be >= 0")
    dist = grid.norm(B.center)
    outer = _inside(dist, B.radius * 2**j)
    if j == 0:
        return outer
    return outer & ~_inside(dist, B.radius * 2 ** (j - 1))


def family_reduce(family: BallFamily, arrays: Sequence[np.ndarray], func) -> np.ndarray:
    """Apply ``func(windows, valid)`` ball by ball; returns shape (R, Nc).

    ``windows`` is a list with one (chunk, K) gather per input array and
    ``func`` must return one value per row.
    """
    flats = [np.asarray(a).ravel() for a in arrays]
    out = None
    for ri, r in enumerate(family.radii):
        for sl, flat, valid in family.windows(r):
            vals = func([a[flat] for a in flats], valid)
            if out is None:
                out = np.empty((len(family.radii), len(family.centers)), dtype=np.result_type(vals, float))
            out[ri, sl] = vals
    if np.any(out is None):  # pragma: no cover - family is never empty
        raise ValueError("empty family")
    return out


def _masked_mean(v, valid):
    cnt = valid.sum(axis=1)
    if np.any(cnt == 0):
        raise ValueError("ball misses grid")
    return np.where(valid, v, 0).sum(axis=1) / cnt


def family_means(values: np.ndarray, family: BallFamily) -> np.ndarray:
    """Clipped ball averages for every (radius, center); shape (R, Nc)."""
    return family_reduce(family, [values], lambda w, valid: _masked_mean(w[0], valid))


def sup_over_family(ball_values: np.ndarray, family: BallFamily, radius_select=None) -> np.ndarray:
    """``out(x) = max`` of ``ball_values`` over family balls containing x.

    Points contained in no selected ball get ``-inf``.
    """
    grid = family.grid
    out = np.full(grid.shape, -np.inf)
    sel = np.ones(len(family.radii), bool) if radius_select is None else np.asarray(radius_select)
    for ri, r in enumerate(family.radii):
        if not sel[ri]:
            continue
        vals = ball_values[ri]
        if family.center_index is not None:
            A = np.full(grid.shape, -np.inf)
            A[tuple(family.center_index.T)] = vals
            # x in B(c, r) iff c in B(x, r): a max filter over the disc footprint
            acc = ndimage.maximum_filter(A, footprint=family.footprint(r), mode="constant", cval=-np.inf)
            np.maximum(out, acc, out=out)
        else:
            for c, v in zip(family.centers, vals):
                m = _inside(grid.norm(c), r)
                out[m] = np.maximum(out[m], v)
    return out


@dataclass(frozen=True)
class GrowthFit:
    """Envelope ``Q(r) <= C (1 + r)^theta (1 + max_residual)`` over tested samples."""

    C: float
    theta: float
    max_residual: float = 0.0

    @property
    def envelope(self) -> float:
        return self.C * (1.0 + self.max_residual)

    def bound(self, r):
        return self.C * (1.0 + np.asarray(r, float)) ** self.theta


def _per_radius_max(samples):
    arr = np.asarray([(float(r), float(q)) for r, q in samples], float)
    if arr.size == 0:
        raise ValueError("no samples")
    if not np.all(np.isfinite(arr[:, 1])):
        raise DivergentQuantityError("divergent quantity")
    if np.any(arr[:, 1] < 0):
        raise ValueError("quantities must be nonnegative")
    radii = np.unique(arr[:, 0])
    qmax = np.array([arr[arr[:, 0] == r, 1].max() for r in radii])
    return radii, qmax


def fit_growth(samples, theta: float | None = None) -> GrowthFit:
    """Fit ``(C, theta)`` so that ``Q <= C (1 + r)^theta`` on every sample.

    With ``theta=None`` the exponent is the least-squares slope of
    ``log max_r Q`` against ``log(1 + r)`` (clamped at 0) and ``C`` is the exact
    envelope constant, so ``max_residual == 0``.

    With a fixed ``theta``, ``C`` is calibrated on the smallest tested radius
    and ``max_residual`` is the largest relative excess over that calibrated
    curve; ``envelope`` then equals the sup-achieving constant.
    """
    radii, qmax = _per_radius_max(samples)
    if len(radii) < 2:
        raise ValueError("need at least two distinct radii")
    x = np.log1p(radii)
    if not np.any(qmax > 0):
        return GrowthFit(0.0, 0.0 if theta is None else float(theta), 0.0)
    if theta is None:
        pos = qmax > 0
        th = 0.0
        if pos.sum() >= 2:
            xs, ys = x[pos], np.log(qmax[pos])
            dx, dy = xs - xs.mean(), ys - ys.mean()
            th = max(0.0, float(np.sum(dx * dy) / np.sum(dx * dx)))
        C = float(np.max(qmax / (1.0 + radii) ** th))
        return GrowthFit(C, th, 0.0)
    th = float(theta)
    if th < 0:
        raise ValueError("theta must be nonnegative")
    scaled = qmax / (1.0 + radii) ** th
    C = float(scaled[0])
    if C == 0.0:
        C = float(scaled[scaled > 0][0])
    return GrowthFit(C, th, float(max(0.0, scaled.max() / C - 1.0)))
