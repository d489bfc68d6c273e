"""Multilinear pseudodifferential operators on the periodic box.

The box ``[-L, L)^n`` is read periodically with frequency lattice
``(pi / L) * {-G/2, ..., G/2 - 1}`` per axis.  Discrete Fourier coefficients
are normalized as ``f_hat(w) = G^-n sum_x f(x) exp(-i w.x)`` so that
``f(x) = sum_w f_hat(w) exp(i w.x)`` holds on the lattice and the symbol
``a = 1`` reproduces the pointwise product.
"""
from __future__ import annotations

import itertools
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .czkernel import CostGuardError, KernelSpec
from .grid import GridFunction, GridSpec

__all__ = [
    "BandWarning",
    "SymbolSpec",
    "LPPartition",
    "frequencies",
    "dft",
    "out_of_band_fraction",
    "phi0",
    "lp_partition",
    "constant_symbol",
    "model_symbol",
    "order_one_symbol",
    "root_model_symbol",
    "symbol_from_config",
    "class_samples",
    "ClassCheck",
    "symbol_class_check",
    "dyadic_symbol",
    "truncated_symbol",
    "apply_Ta",
    "extract_kernel",
    "LatticeKernel",
    "lattice_kernel_samples",
    "lattice_h2_pairs",
    "dyadic_decay_constants",
]

MAX_OPS = 1e9


class BandWarning(UserWarning):
    pass


# ---------------------------------------------------------------- symbols

@dataclass(eq=False)
class SymbolSpec:
    """``eval(x, xi)`` with ``x`` of shape ``(..., n)`` and ``xi`` of shape ``(..., m, n)``.

    Optional ``x_part`` / ``xi_part`` declare ``a(x, xi) = x_part(x) xi_part(xi)``,
    which enables the matrix fast path in ``apply_Ta``.
    """

    m: int
    n: int
    eval: Callable
    l: float = 0.0
    rho: float = 1.0
    delta: float = 0.0
    x_part: Callable | None = None
    xi_part: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.rho <= 1 and 0 <= self.delta <= 1):
            raise ValueError("rho and delta must lie in [0, 1]")

    def __call__(self, x, xi):
        return self.eval(np.asarray(x, float), np.asarray(xi, float))

    @property
    def separable(self) -> bool:
        return self.x_part is not None and self.xi_part is not None

    def describe(self) -> dict:
        return {"name": self.name, "m": self.m, "n": self.n, "l": self.l, "rho": self.rho, "delta": self.delta, **self.params}


def _separable(m, n, x_part, xi_part, **kw) -> SymbolSpec:
    return SymbolSpec(m, n, lambda x, xi: x_part(x) * xi_part(xi), x_part=x_part, xi_part=xi_part, **kw)


def constant_symbol(m: int, n: int, value: float = 1.0) -> SymbolSpec:
    return _separable(
        m, n,
        lambda x: np.full(np.shape(x)[:-1], float(value)),
        lambda xi: np.ones(np.shape(xi)[:-2]),
        name="one" if value == 1 else "const", params={"value": value},
    )


def model_symbol(m: int = 2, n: int = 1, lam: float = 4.0) -> SymbolSpec:
    """``(1 + sin(x_1)/2) (lam^2 + |xi_1|^2) / (lam^2 + |xi|^2)``, order 0 with delta = 0.

    ``lam`` sets the spatial decay rate of the kernel.  For ``m = 1`` the
    degree-zero factor is ``(lam^2 + 2|xi|^2) / (lam^2 + |xi|^2)``.
    """
    l2 = float(lam) ** 2

    def xi_part(xi):
        tot = (xi**2).sum(axis=(-1, -2))
        first = (xi[..., 0, :] ** 2).sum(-1)
        if m == 1:
            first = 2 * first
        return (l2 + first) / (l2 + tot)

    return _separable(m, n, lambda x: 1.0 + 0.5 * np.sin(x[..., 0]), xi_part, name="model", params={"lam": lam})


def root_model_symbol(m: int = 2, n: int = 1) -> SymbolSpec:
    """``(1 + sin x/2)(1+|xi_1|^2)^{1/2}(1+|xi|^2)^{-1/2}``.

    Its second derivative in ``xi_1`` along ``xi_1 = 0`` decays only like
    ``|xi|^-1``, so it fails the order-0, rho = 1 class bounds; kept as a
    negative fixture.
    """
    def xi_part(xi):
        tot = (xi**2).sum(axis=(-1, -2))
        return np.sqrt(1 + (xi[..., 0, :] ** 2).sum(-1)) / np.sqrt(1 + tot)

    return _separable(m, n, lambda x: 1.0 + 0.5 * np.sin(x[..., 0]), xi_part, name="root-model")


def order_one_symbol(m: int = 2, n: int = 1) -> SymbolSpec:
    """``(1 + |xi_1|^2)^{1/2}``: order one, so outside every order-0 class."""
    return _separable(
        m, n, lambda x: np.ones(np.shape(x)[:-1]),
        lambda xi: np.sqrt(1 + (xi[..., 0, :] ** 2).sum(-1)), name="order-one",
    )


def symbol_from_config(cfg: dict, m: int, n: int) -> SymbolSpec:
    name = cfg.get("name", "model")
    if name == "model":
        return model_symbol(m, n, float(cfg.get("lam", 4.0)))
    if name in ("one", "const"):
        return constant_symbol(m, n, float(cfg.get("value", 1.0)))
    if name == "order-one":
        return order_one_symbol(m, n)
    if name == "root-model":
        return root_model_symbol(m, n)
    raise ValueError(f"unknown symbol {name!r}")


# ---------------------------------------------------------------- Fourier plumbing

def frequencies(grid: GridSpec) -> np.ndarray:
    """Per-axis frequency lattice ``(pi/L) k``, ``k = -G/2 .. G/2-1``."""
    return (math.pi / grid.L) * np.arange(-grid.G // 2, grid.G // 2)


def _phase(grid: GridSpec) -> np.ndarray:
    k = np.arange(-grid.G // 2, grid.G // 2)
    return np.exp(-1j * math.pi * k * (1 - grid.G) / grid.G)


def dft(f: GridFunction | np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Coefficients on the natural-order frequency lattice (shape ``grid.shape``)."""
    grid = grid or f.grid
    v = f.values if isinstance(f, GridFunction) else np.asarray(f)
    out = np.fft.fftshift(np.fft.fftn(v)) / grid.size
    ph = _phase(grid)
    for ax in range(grid.n):
        shp = [1] * grid.n
        shp[ax] = grid.G
        out = out * ph.reshape(shp)
    return out


def out_of_band_fraction(f: GridFunction) -> float:
    """Energy fraction at modes with some ``|k| >= G/4``."""
    F = np.abs(dft(f)) ** 2
    k = np.abs(np.arange(-f.grid.G // 2, f.grid.G // 2))
    inb = k < f.grid.G // 4
    mask = np.ones(F.shape, bool)
    for ax in range(f.grid.n):
        shp = [1] * f.grid.n
        shp[ax] = f.grid.G
        mask &= inb.reshape(shp)
    tot = F.sum()
    return float(F[~mask].sum() / tot) if tot > 0 else 0.0


def _xi_lattice(grid: GridSpec, m: int) -> np.ndarray:
    """All frequency tuples; shape ``(G,)*(n m) + (m, n)``."""
    w = frequencies(grid)
    axes = np.meshgrid(*([w] * (grid.n * m)), indexing="ij")
    return np.stack(axes, -1).reshape(axes[0].shape + (m, grid.n))


# ---------------------------------------------------------------- Littlewood-Paley

@lru_cache(maxsize=1)
def _gl(order: int = 80):
    return np.polynomial.legendre.leggauss(order)


def _bump(u):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(np.abs(u) < 1, np.exp(-1.0 / np.maximum(1 - u**2, 1e-300)), 0.0)


def _bump_integral(t):
    # int_0^t bump(2s - 1) ds by Gauss-Legendre on [0, t]
    x, w = _gl()
    t = np.asarray(t, float)
    s = 0.5 * t[..., None] * (x + 1)
    return 0.5 * t * (_bump(2 * s - 1) * w).sum(-1)


_B1 = float(_bump_integral(np.array(1.0)))


def phi0(r) -> np.ndarray:
    """Radial profile: 1 on ``r <= 1``, 0 on ``r >= 2``, smooth in between."""
    r = np.asarray(r, float)
    out = np.where(r <= 1, 1.0, 0.0)
    band = np.flatnonzero((r > 1) & (r < 2))
    flat = out.reshape(-1)
    rr = r.reshape(-1)
    for start in range(0, band.size, 1 << 16):
        sel = band[start:start + (1 << 16)]
        flat[sel] = np.clip(1.0 - _bump_integral(rr[sel] - 1.0) / _B1, 0.0, 1.0)
    return out


def _phi_k(k: int, r):
    if k == 0:
        return phi0(r)
    return phi0(r / 2.0**k) - phi0(r / 2.0 ** (k - 1))


@dataclass(frozen=True, eq=False)
class LPPartition:
    """Dyadic partition of unity; ``table[k]`` holds ``phi_k`` on the supplied radii."""

    K: int
    radii: np.ndarray
    table: np.ndarray

    def phi(self, k: int, r):
        if not 0 <= k <= self.K:
            raise ValueError(f"level {k} outside 0..{self.K}")
        return _phi_k(k, r)

    def tail(self, r):
        """``sum_{k <= K} phi_k = phi0(2^-K r)``."""
        return phi0(np.asarray(r, float) / 2.0**self.K)


def lp_partition(K: int, radii=None) -> LPPartition:
    """Tabulate ``phi_0 .. phi_K`` on ``radii`` (default: empty table)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    r = np.zeros(0) if radii is None else np.asarray(radii, float)
    table = np.stack([_phi_k(k, r) for k in range(K + 1)])
    return LPPartition(K, r, table)


def _xi_norm(xi):
    return np.sqrt((np.asarray(xi) ** 2).sum(axis=(-1, -2)))


def dyadic_symbol(a: SymbolSpec, part: LPPartition, k: int) -> SymbolSpec:
    """``a_k = phi_k(|xi|) a``."""
    if not 0 <= k <= part.K:
        raise ValueError(f"level {k} outside 0..{part.K}")
    return _windowed(a, lambda xi: _phi_k(k, _xi_norm(xi)), f"{a.name}@k={k}", {"k": k})


def truncated_symbol(a: SymbolSpec, K: int) -> SymbolSpec:
    """``a phi0(2^-K |xi|) = sum_{k <= K} a_k``."""
    return _windowed(a, lambda xi: phi0(_xi_norm(xi) / 2.0**K), f"{a.name}@<= {K}", {"K": K})


def _windowed(a, win, name, extra):
    params = {**a.params, **extra}
    if a.separable:
        xp, xq = a.x_part, a.xi_part
        return _separable(a.m, a.n, xp, lambda xi: xq(xi) * win(xi), l=a.l, rho=a.rho, delta=a.delta, name=name, params=params)
    ev = a.eval
    return SymbolSpec(a.m, a.n, lambda x, xi: ev(x, xi) * win(xi), a.l, a.rho, a.delta, name=name, params=params)


# ---------------------------------------------------------------- class check

def _multi_indices(nvars: int, max_order: int):
    out = []
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), order):
            out.append(combo)
    return out


def class_samples(m: int, n: int, shells: int, per_shell: int, rng: np.random.Generator):
    """``(x, xi, shell)`` with ``|xi|`` log-uniform in ``[2^j, 2^{j+1})`` for ``j < shells``.

    Shell ``-1`` holds ``|xi| < 1``.  Each shell also gets the coordinate-axis
    directions, where degenerate symbols tend to misbehave.
    """
    d = m * n
    xs, xis, tag = [], [], []
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    for j in range(-1, shells):
        dirs = rng.normal(size=(per_shell, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.concatenate([dirs, axes])
        cnt = len(dirs)
        if j < 0:
            r = rng.uniform(0, 1, size=cnt)
        else:
            r = 2.0 ** (j + rng.uniform(0, 1, size=cnt))
        xis.append((dirs * r[:, None]).reshape(cnt, m, n))
        xs.append(rng.uniform(-math.pi, math.pi, size=(cnt, n)))
        tag.append(np.full(cnt, j))
    return np.concatenate(xs), np.concatenate(xis), np.concatenate(tag)


@dataclass
class ClassCheck:
    """Fitted constants per derivative ``(alpha, beta)``.

    ``alpha`` counts x-derivatives, ``beta`` the xi-derivatives (as tuples of
    flattened xi coordinates).
    """

    symbol: str
    l: float
    rho: float
    delta: float
    C: dict
    C_inner: dict
    divergent: dict
    n_samples: int
    n_skipped: int

    @property
    def any_divergent(self) -> bool:
        return any(self.divergent.values())

    def rows(self) -> list[dict]:
        return [{"alpha": a, "beta": b, "C": self.C[(a, b)], "divergent": self.divergent[(a, b)]} for a, b in self.C]


def symbol_class_check(a: SymbolSpec, samples, max_order: int = 2, l: float | None = None, rho: float | None = None,
                       delta: float | None = None, eta: float = 1e-3, growth: float = 0.1) -> ClassCheck:
    """Finite-difference constants ``max |d_x^alpha d_xi^beta a| (1 + sum|xi_j|)^{-(l + delta|alpha| - rho|beta|)}``."""
    l = a.l if l is None else l
    rho = a.rho if rho is None else rho
    delta = a.delta if delta is None else delta
    x, xi, _ = samples
    x = np.asarray(x, float)
    xi = np.asarray(xi, float)
    P, m, n = xi.shape
    z = np.concatenate([x, xi.reshape(P, m * n)], axis=1)
    nv = z.shape[1]
    size = 1.0 + np.sqrt((xi**2).sum(-1)).sum(-1)
    steps = np.empty((P, nv))
    steps[:, :n] = eta
    steps[:, n:] = eta * size[:, None]
    ok = np.all(np.isfinite(z), axis=1)
    ok &= np.all((z + steps) - z > 0.5 * steps, axis=1)

    def f(zz):
        with np.errstate(all="ignore"):
            return np.asarray(a(zz[:, :n], zz[:, n:].reshape(-1, m, n)), complex)

    def shifted(delta_idx):
        zz = z.copy()
        for v, sgn in delta_idx:
            zz[:, v] += sgn * steps[:, v]
        return f(zz)

    base = f(z)
    ok &= np.isfinite(base)
    C, Ci, div = {}, {}, {}
    nrm = _xi_norm(xi)
    inner = nrm <= 0.5 * nrm[ok].max() if ok.any() else ok
    for combo in _multi_indices(nv, max_order):
        if len(combo) == 0:
            D = base
        elif len(combo) == 1:
            (v,) = combo
            D = (shifted([(v, 1)]) - shifted([(v, -1)])) / (2 * steps[:, v])
        elif combo[0] == combo[1]:
            v = combo[0]
            D = (shifted([(v, 1)]) - 2 * base + shifted([(v, -1)])) / steps[:, v] ** 2
        else:
            v, w = combo
            D = (shifted([(v, 1), (w, 1)]) - shifted([(v, 1), (w, -1)]) - shifted([(v, -1), (w, 1)])
                 + shifted([(v, -1), (w, -1)])) / (4 * steps[:, v] * steps[:, w])
        alpha = sum(1 for v in combo if v < n)
        beta = tuple(v - n for v in combo if v >= n)
        expo = l + delta * alpha - rho * len(beta)
        good = ok & np.isfinite(D)
        r = np.where(good, np.abs(D) * size ** (-expo), 0.0)
        key = (alpha, beta)
        c = float(r.max()) if good.any() else 0.0
        ci = float(r[good & inner].max()) if (good & inner).any() else 0.0
        C[key] = max(C.get(key, 0.0), c)
        Ci[key] = max(Ci.get(key, 0.0), ci)
    for key in C:
        div[key] = bool(C[key] > (1 + growth) * Ci[key] + 1e-300)
    return ClassCheck(a.name, l, rho, delta, C, Ci, div, int(ok.sum()), int((~ok).sum()))


# ---------------------------------------------------------------- application

def apply_Ta(a: SymbolSpec, fvec: Sequence[GridFunction], max_ops: float = MAX_OPS, band_tol: float = 1e-8) -> GridFunction:
    """``T_a(f)(x) = sum_xi a(x, xi) prod_j f_hat_j(xi_j) exp(i x.(xi_1 + ... + xi_m))``."""
    if len(fvec) != a.m:
        raise ValueError(f"symbol is {a.m}-linear, got {len(fvec)} inputs")
    grid = fvec[0].grid
    if grid.n != a.n:
        raise ValueError("symbol and grid dimensions differ")
    ops = float(grid.size) ** (a.m + 1)
    if ops > max_ops:
        raise CostGuardError(f"apply_Ta needs ~{ops:.3g} operations (guard {max_ops:.3g})")
    for j, f in enumerate(fvec):
        frac = out_of_band_fraction(f)
        if frac > band_tol:
            warnings.warn(f"input {j} has out-of-band energy fraction {frac:.3g}", BandWarning, stacklevel=2)
    pts = grid.points
    w = frequencies(grid)
    wl = np.stack(np.meshgrid(*([w] * grid.n), indexing="ij"), -1).reshape(-1, grid.n)
    E = np.exp(1j * pts @ wl.T)  # (P, F)
    U = [E * dft(f).ravel()[None, :] for f in fvec]
    Fn = len(wl)
    if a.separable:
        xi = _xi_lattice(grid, a.m).reshape((Fn,) * a.m + (a.m, grid.n))
        A = np.asarray(a.xi_part(xi), complex)
        if a.m == 1:
            core = U[0] @ A
        else:
            core = np.einsum("pa,ab,pb->p", U[0], A.reshape(Fn, Fn), U[1])
        out = np.asarray(a.x_part(pts), float) * core
    else:
        xi = _xi_lattice(grid, a.m).reshape(-1, a.m, grid.n)
        out = np.empty(len(pts), complex)
        for q, x in enumerate(pts):
            A = np.asarray(a(x[None, :], xi), complex).reshape((Fn,) * a.m)
            acc = A
            for u in reversed(U):
                acc = acc @ u[q]
            out[q] = acc
    return GridFunction(grid, out.reshape(grid.shape))


def extract_kernel(a: SymbolSpec, part: LPPartition | None, k: int | None, x0, grid: GridSpec) -> np.ndarray:
    """``K(x0, y_1..y_m) = (2L)^{-nm} sum_xi a_k(x0, xi) exp(i sum_j xi_j.(x0 - y_j))`` on the y-lattice.

    With ``part=None`` the full symbol is used.  Output shape ``grid.shape * m``;
    ``h^{nm} sum_y K prod f_j(y_j)`` equals ``apply_Ta`` at ``x0``.
    """
    sym = a if part is None else dyadic_symbol(a, part, k)
    n, m, G = grid.n, a.m, grid.G
    x0 = np.broadcast_to(np.asarray(x0, float), (n,))
    xi = _xi_lattice(grid, m)
    A = np.asarray(sym(x0, xi), complex)
    w = frequencies(grid)
    ph = _phase(grid)
    B = A
    for slot in range(m):
        for ax in range(n):
            d = slot * n + ax
            shp = [1] * (n * m)
            shp[d] = G
            B = B * (np.exp(1j * w * x0[ax]) * ph).reshape(shp)
    B = np.fft.ifftshift(B)
    K = np.fft.fftn(B) / (2 * grid.L) ** (n * m)
    return K


# ---------------------------------------------------------------- lattice kernels

class LatticeKernel:
    """Kernel of a symbol sampled on the y-lattice, exposed as a ``KernelSpec``.

    Arguments must be lattice points; ``y_1..y_m`` are read periodically.
    Slices ``K(x0, .)`` are cached per ``x0`` index (LRU).
    """

    def __init__(self, a: SymbolSpec, grid: GridSpec, cache: int = 2):
        self.a = a
        self.grid = grid
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache

    def slice(self, i0: tuple) -> np.ndarray:
        if i0 in self._cache:
            self._cache.move_to_end(i0)
            return self._cache[i0]
        x0 = self.grid.mesh[i0]
        K = extract_kernel(self.a, None, None, x0, self.grid)
        self._cache[i0] = K
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return K

    def _index(self, y):
        g = self.grid
        idx = (y + g.L) / g.h - 0.5
        r = np.rint(idx)
        if np.any(np.abs(idx - r) > 1e-6):
            raise ValueError("lattice kernel evaluated off the lattice")
        return r.astype(np.int64)

    def __call__(self, y):
        y = np.asarray(y, float)
        flat = y.reshape(-1, self.a.m + 1, self.grid.n)
        idx = self._index(flat)
        G = self.grid.G
        if np.any((idx[:, 0] < 0) | (idx[:, 0] >= G)):
            raise ValueError("x0 must lie in the box")
        out = np.empty(len(flat), complex)
        i0s = [tuple(r) for r in idx[:, 0]]
        order = sorted(set(i0s))
        i0_arr = np.array(i0s)
        for i0 in order:
            sel = np.all(i0_arr == np.array(i0), axis=1)
            K = self.slice(i0)
            yi = idx[sel, 1:] % G
            out[sel] = K[tuple(yi.reshape(len(yi), -1).T)]
        return out.reshape(y.shape[:-2])

    def spec(self, epsilon: float = 1.0) -> KernelSpec:
        return KernelSpec(self.a.m, self.grid.n, self, epsilon, 1.0, f"kernel[{self.a.name}]", False, dict(self.a.params))


def lattice_kernel_samples(grid: GridSpec, m: int, x0_indices, count: int, max_offset: int, rng: np.random.Generator) -> np.ndarray:
    """Off-diagonal lattice tuples ``(x0, x0 + h d_1, ..)`` with ``|d_j| <= max_offset`` cells."""
    n = grid.n
    per = count // len(x0_indices)
    out = []
    for i0 in x0_indices:
        i0 = np.broadcast_to(np.asarray(i0), (n,))
        x0 = grid.mesh[tuple(i0)]
        d = rng.integers(-max_offset, max_offset + 1, size=(per, m, n))
        # log-spread the offsets so small separations are well represented
        scale = np.rint(np.abs(d) ** rng.uniform(0.3, 1.0, size=(per, 1, 1))) * np.sign(d)
        d = np.where(rng.uniform(size=(per, 1, 1)) < 0.5, d, scale)
        y = np.empty((per, m + 1, n))
        y[:, 0] = x0
        y[:, 1:] = x0 + d * grid.h
        out.append(y)
    y = np.concatenate(out)
    from .czkernel import diagonal_sum

    return y[diagonal_sum(y) > 0]


def lattice_h2_pairs(y: np.ndarray, grid: GridSpec, rng: np.random.Generator, move_x0: bool = False):
    """Admissible lattice displacements of one argument per sample.

    ``j = 0`` is only chosen with ``move_x0`` (it requires another slice).
    """
    P, M, n = y.shape
    lo = 0 if move_x0 else 1
    j = rng.integers(lo, M, size=P)
    idx = np.arange(P)
    yj = y[idx, j]
    H = 0.5 * np.sqrt(((y - yj[:, None, :]) ** 2).sum(-1)).max(axis=1)
    cells = np.floor(H / grid.h / math.sqrt(n) + 1e-9).astype(np.int64)
    d = np.stack([rng.integers(-c, c + 1, size=n) if c > 0 else np.zeros(n, np.int64) for c in cells])
    new = yj + d * grid.h
    if move_x0:
        i0 = np.rint((new + grid.L) / grid.h - 0.5)
        bad = (j == 0) & np.any((i0 < 0) | (i0 >= grid.G), axis=1)
        new[bad] = yj[bad]
    return y, j, new


def dyadic_decay_constants(a: SymbolSpec, part: LPPartition, ks: Sequence[int], x0, grid: GridSpec) -> dict:
    """``2^{-k mn} max_y |K_k(x0, y)| (1 + 2^k |x0 - y_1|)^{mn + 1}`` per level ``k``.

    ``|x0 - y_1|`` is the periodic distance.
    """
    n, m = grid.n, a.m
    x0 = np.broadcast_to(np.asarray(x0, float), (n,))
    mesh = grid.mesh
    diff = np.abs(mesh - x0)
    diff = np.minimum(diff, 2 * grid.L - diff)
    dist = np.sqrt((diff**2).sum(-1))
    out = {}
    for k in ks:
        K = np.abs(extract_kernel(a, part, k, x0, grid))
        Kmax = K.reshape(grid.shape + (-1,)).max(-1) if m > 1 else K
        out[k] = float((Kmax * (1 + 2.0**k * dist) ** (m * n + 1)).max() * 2.0 ** (-k * m * n))
    return out
