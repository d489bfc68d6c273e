"""Multilinear singular kernels: model family, size/smoothness verification, quadrature.

Kernel arguments are packed as arrays of shape ``(..., m + 1, n)`` holding
``(y_0, y_1, ..., y_m)`` with ``y_0`` the output point ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import GridFunction, GridSpec

__all__ = [
    "KernelSpec",
    "H1Report",
    "H2Report",
    "diagonal_sum",
    "model_kernel",
    "pure_power_kernel",
    "zero_kernel",
    "kernel_from_config",
    "random_samples",
    "random_h2_pairs",
    "verify_h1",
    "verify_h2",
    "apply_T",
    "commutator_apply",
    "CostGuardError",
]

MAX_OPS = 1e9


class CostGuardError(RuntimeError):
    pass


def diagonal_sum(y: np.ndarray) -> np.ndarray:
    """``S = sum_{k<l} |y_k - y_l|`` over the argument axis (-2)."""
    y = np.asarray(y, float)
    M = y.shape[-2]
    S = np.zeros(y.shape[:-2])
    for k in range(M):
        for l in range(k + 1, M):
            S = S + np.sqrt(((y[..., k, :] - y[..., l, :]) ** 2).sum(-1))
    return S


@dataclass(eq=False)
class KernelSpec:
    """``eval`` maps ``(..., m+1, n)`` argument arrays to kernel values.

    ``translation_invariant`` enables the difference-table quadrature path.
    """

    m: int
    n: int
    eval: Callable[[np.ndarray], np.ndarray]
    epsilon: float = 1.0
    decay_scale: float = 1.0
    name: str = "custom"
    translation_invariant: bool = False
    params: dict = field(default_factory=dict)
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.decay_scale <= 0:
            raise ValueError("decay_scale must be positive")

    def __call__(self, y) -> np.ndarray:
        return self.eval(np.asarray(y, float))

    def describe(self) -> dict:
        return {"name": self.name, "m": self.m, "n": self.n, "epsilon": self.epsilon, **self.params}


def _check_mn(m, n):
    if m not in (1, 2) or n not in (1, 2):
        raise ValueError("m and n must be 1 or 2")


def model_kernel(m: int, n: int, scale: float = 1.0) -> KernelSpec:
    """``exp(-S/scale) / S^{mn}``: power singularity on the diagonal, exponential decay."""
    _check_mn(m, n)
    if scale <= 0:
        raise ValueError("scale must be positive")
    mn = m * n

    def ev(y):
        S = diagonal_sum(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(S > 0, np.exp(-S / scale) / S**mn, np.nan)

    return KernelSpec(m, n, ev, 1.0, scale, "model", True, {"scale": scale})


def pure_power_kernel(m: int, n: int) -> KernelSpec:
    """``S^{-mn}`` with no decay factor; fails the size condition for N > mn."""
    _check_mn(m, n)
    mn = m * n

    def ev(y):
        S = diagonal_sum(y)
        with np.errstate(divide="ignore"):
            return np.where(S > 0, 1.0 / np.where(S > 0, S, 1.0) ** mn, np.nan)

    return KernelSpec(m, n, ev, 1.0, 1.0, "pure-power", True)


def zero_kernel(m: int, n: int) -> KernelSpec:
    return KernelSpec(m, n, lambda y: np.zeros(np.shape(y)[:-2]), 1.0, 1.0, "zero", True)


def kernel_from_config(cfg: dict, m: int, n: int) -> KernelSpec:
    name = cfg.get("name", "model")
    if name == "model":
        return model_kernel(m, n, float(cfg.get("scale", 1.0)))
    if name == "pure-power":
        return pure_power_kernel(m, n)
    if name == "zero":
        return zero_kernel(m, n)
    raise ValueError(f"unknown kernel {name!r}")


# ---------------------------------------------------------------- sampling

def random_samples(m: int, n: int, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``count`` argument tuples uniform in the cube ``[-radius, radius]^{(m+1) n}``."""
    return rng.uniform(-radius, radius, size=(count, m + 1, n))


def random_h2_pairs(m: int, n: int, count: int, radius: float, rng: np.random.Generator, frac: float = 0.5):
    """Admissible ``(y, j, y_j')`` triples with ``|y_j - y_j'| <= frac * max_k |y_j - y_k|``."""
    if not 0 <= frac <= 0.5:
        raise ValueError("frac must lie in [0, 0.5]")
    y = random_samples(m, n, count, radius, rng)
    j = rng.integers(0, m + 1, size=count)
    yj = y[np.arange(count), j]
    H = np.sqrt(((y - yj[:, None, :]) ** 2).sum(-1)).max(axis=1)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    mag = frac * H * rng.uniform(0, 1, size=count) ** (1.0 / n)
    return y, j, yj + d * mag[:, None]


# ---------------------------------------------------------------- verification

@dataclass
class H1Report:
    N_list: tuple
    C: dict
    C_inner: dict
    divergent: dict
    n_samples: int
    n_skipped: int
    note: str = "literal size condition |K| <= C S^-N; N < mn is not meaningful for kernels singular like S^-mn"

    @property
    def any_divergent(self) -> bool:
        return any(self.divergent.values())

    def rows(self) -> list[dict]:
        return [{"N": N, "C_N": self.C[N], "divergent": self.divergent[N]} for N in self.N_list]


@dataclass
class H2Report:
    N_list: tuple
    epsilon: float
    C: dict
    C_inner: dict
    divergent: dict
    n_pairs: int
    n_skipped: int

    @property
    def any_divergent(self) -> bool:
        return any(self.divergent.values())

    def rows(self) -> list[dict]:
        return [{"N": N, "C_N": self.C[N], "divergent": self.divergent[N]} for N in self.N_list]


def _growth_flags(ratio: np.ndarray, extent: np.ndarray, N_list, growth: float):
    # C over the full sample set versus the samples in the inner half of the
    # sampled extent; growth beyond ``growth`` flags divergence.
    inner = extent <= 0.5 * extent.max() if extent.size else extent
    C, Ci, div = {}, {}, {}
    for i, N in enumerate(N_list):
        r = ratio[i]
        c = float(r.max()) if r.size else 0.0
        ci = float(r[inner].max()) if inner.any() else 0.0
        C[N], Ci[N] = c, ci
        div[N] = bool(not math.isfinite(c) or c > (1 + growth) * ci + 1e-300)
    return C, Ci, div


def verify_h1(K: KernelSpec, samples: np.ndarray, N_list: Sequence[float], growth: float = 0.1) -> H1Report:
    """``C_N = max |K| S^N`` over off-diagonal samples, with a region-doubling divergence flag."""
    N_list = tuple(N_list)
    if not N_list:
        raise ValueError("N_list must be nonempty")
    y = np.asarray(samples, float)
    S = diagonal_sum(y)
    off = S > 0
    y, S = y[off], S[off]
    Kv = np.abs(K(y)) if len(y) else np.zeros(0)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.array([Kv * S**N for N in N_list]).reshape(len(N_list), -1)
    ratio = np.nan_to_num(ratio, nan=np.inf)
    C, Ci, div = _growth_flags(ratio, S, N_list, growth)
    return H1Report(N_list, C, Ci, div, int(off.sum()), int((~off).sum()))


def verify_h2(K: KernelSpec, pairs, N_list: Sequence[float], growth: float = 0.1, epsilon: float | None = None) -> H2Report:
    """``C_N = max |dK| S^{mn+eps} / (|y_j - y_j'|^eps min(1, h^-N))``.

    ``pairs = (y, j, yj_new)``; raises ``ValueError("displacement too large")``
    if any displacement exceeds half of ``max_k |y_j - y_k|``.
    """
    N_list = tuple(N_list)
    eps = K.epsilon if epsilon is None else float(epsilon)
    y, j, yj_new = (np.asarray(a) for a in pairs)
    y = y.astype(float)
    P = len(y)
    idx = np.arange(P)
    yj = y[idx, j]
    disp = np.sqrt(((yj_new - yj) ** 2).sum(-1))
    h = 0.5 * np.sqrt(((y - yj[:, None, :]) ** 2).sum(-1)).max(axis=1)
    if np.any(disp > h * (1 + 1e-12)):
        raise ValueError("displacement too large")
    y2 = y.copy()
    y2[idx, j] = yj_new
    S = diagonal_sum(y)
    ok = (S > 0) & (diagonal_sum(y2) > 0)
    moved = ok & (disp > 0)
    mn = K.m * K.n
    ratio = np.zeros((len(N_list), P))
    if moved.any():
        dK = np.abs(K(y2[moved]) - K(y[moved]))
        base = dK * S[moved] ** (mn + eps) / disp[moved] ** eps
        for i, N in enumerate(N_list):
            ratio[i, moved] = base / np.minimum(1.0, h[moved] ** (-float(N)))
    ratio = np.nan_to_num(ratio[:, ok], nan=np.inf)
    C, Ci, div = _growth_flags(ratio, S[ok], N_list, growth)
    return H2Report(N_list, eps, C, Ci, div, int(ok.sum()), int((~ok).sum()))


# ---------------------------------------------------------------- quadrature

def _values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


def _lattice_args(grid: GridSpec, x: np.ndarray, m: int) -> np.ndarray:
    """All ``(x, y_1..y_m)`` with ``y`` on the lattice; shape ``(G^{nm}, m+1, n)``."""
    pts = grid.points
    Np = len(pts)
    idx = np.stack(np.meshgrid(*([np.arange(Np)] * m), indexing="ij"), -1).reshape(-1, m)
    out = np.empty((len(idx), m + 1, grid.n))
    out[:, 0] = x
    for j in range(m):
        out[:, j + 1] = pts[idx[:, j]]
    return out


def _product_tensor(fs: list[np.ndarray]) -> np.ndarray:
    out = fs[0].ravel()
    for f in fs[1:]:
        out = np.multiply.outer(out, f.ravel())
    return out.ravel()


def _difference_table(K: KernelSpec, grid: GridSpec) -> np.ndarray:
    key = (grid.n, grid.L, grid.G)
    if key not in K._tables:
        G, n, m = grid.G, grid.n, K.m
        d = np.arange(-(G - 1), G) * grid.h
        D = np.stack(np.meshgrid(*([d] * (n * m)), indexing="ij"), -1)  # (2G-1,)*nm + (nm,)
        y = np.zeros(D.shape[:-1] + (m + 1, n))
        y[..., 1:, :] = D.reshape(D.shape[:-1] + (m, n))
        with np.errstate(all="ignore"):
            T = K(y)
        T = np.where(diagonal_sum(y) > 0, T, 0.0)
        K._tables[key] = T
    return K._tables[key]


def _estimate_ops(grid: GridSpec, m: int, npts: int) -> float:
    return float(npts) * float(grid.size) ** m


def apply_T(K: KernelSpec, fvec: Sequence[GridFunction], points=None, max_ops: float = MAX_OPS):
    """Midpoint quadrature of ``int K(x, y) prod f_j(y_j) dy``, exact-diagonal cells omitted.

    Returns a ``GridFunction`` on the grid, or a value array when ``points``
    (shape ``(P, n)``) is given.
    """
    if len(fvec) != K.m:
        raise ValueError(f"kernel is {K.m}-linear, got {len(fvec)} inputs")
    grid = fvec[0].grid
    if grid.n != K.n:
        raise ValueError("kernel and grid dimensions differ")
    fs = [_values(f) for f in fvec]
    dtype = np.result_type(*fs, float)
    vol = grid.cell_volume ** K.m
    if points is None:
        ops = _estimate_ops(grid, K.m, grid.size)
        if ops > max_ops:
            raise CostGuardError(f"apply_T needs ~{ops:.3g} kernel-operations (guard {max_ops:.3g}); pass strided points")
        if K.translation_invariant:
            return GridFunction(grid, _apply_table(K, grid, fs, dtype) * vol)
        out = _apply_general(K, grid, fs, grid.points, dtype) * vol
        return GridFunction(grid, out.reshape(grid.shape))
    pts = np.atleast_2d(np.asarray(points, float))
    ops = _estimate_ops(grid, K.m, len(pts))
    if ops > max_ops:
        raise CostGuardError(f"apply_T needs ~{ops:.3g} kernel-operations (guard {max_ops:.3g})")
    return _apply_general(K, grid, fs, pts, dtype) * vol


def _apply_table(K, grid, fs, dtype):
    T = _difference_table(K, grid)
    G, n, m = grid.G, grid.n, K.m
    out = np.zeros(grid.shape, dtype)
    for i in np.ndindex(*grid.shape):
        sl = tuple(slice(G - 1 - ii, 2 * G - 1 - ii) for ii in i) * m
        block = T[sl]
        acc = block
        for f in reversed(fs):
            acc = np.tensordot(acc, f, axes=n)
        out[i] = acc
    return out


def _apply_general(K, grid, fs, pts, dtype):
    prod = _product_tensor(fs)
    out = np.zeros(len(pts), dtype)
    for q, x in enumerate(pts):
        y = _lattice_args(grid, x, K.m)
        S = diagonal_sum(y)
        keep = S > 0
        with np.errstate(all="ignore"):
            kv = np.where(keep, K(y), 0.0)
        out[q] = np.dot(kv, prod)
    return out


def commutator_apply(K: KernelSpec, bvec, fvec: Sequence[GridFunction], points=None, max_ops: float = MAX_OPS):
    """``sum_j [ b_j T(f) - T(f_1, ..., b_j f_j, ..., f_m) ]``."""
    from .bmo import SymbolVector

    bs = bvec.symbols if isinstance(bvec, SymbolVector) else tuple(bvec)
    bvals = [_values(getattr(b, "b", b)) for b in bs]
    if len(bvals) != K.m:
        raise ValueError("need one symbol per slot")
    grid = fvec[0].grid
    Tf = apply_T(K, fvec, points, max_ops)
    base = Tf.values if points is None else Tf
    if points is not None:
        pidx = grid.coords_to_index(np.atleast_2d(points))
        if not np.allclose(grid.mesh[tuple(pidx.T)], np.atleast_2d(points)):
            raise ValueError("commutator points must be lattice points")
    total = 0.0
    for j, b in enumerate(bvals):
        mod = list(fvec)
        mod[j] = GridFunction(grid, b * _values(fvec[j]))
        Tj = apply_T(K, mod, points, max_ops)
        Tj = Tj.values if points is None else Tj
        bx = b if points is None else b[tuple(pidx.T)]
        total = total + (bx * base - Tj)
    return GridFunction(grid, total) if points is None else total
