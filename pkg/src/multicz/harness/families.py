"""Seeded test-function families.

Each instance is a list of per-slot parameter records, so the same instance
can be sampled on any grid (the refinement step re-samples at ``2G``).
Randomness comes from a counter-based Philox stream keyed by
``(seed, family kind, instance index)``: instance ``i`` does not depend on how
many instances are drawn or on which check asks for it.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np

from ..grid import GridFunction, GridSpec

__all__ = ["Instance", "instance_rng", "make_family", "constant_instance"]


def instance_rng(seed: int, kind: str, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(kind.encode()), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def _bump(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(np.abs(t) < 1, np.exp(-1.0 / np.maximum(1 - t**2, 1e-300)), 0.0)


@dataclass(frozen=True, eq=False)
class Instance:
    id: int
    kind: str
    slots: tuple

    def sample(self, grid: GridSpec) -> list[GridFunction]:
        return [GridFunction(grid, _eval_slot(self.kind, s, grid)) for s in self.slots]

    @property
    def key(self) -> str:
        """Hashable identity: kind plus the full slot parameters."""
        return self.kind + json.dumps(self.slots, sort_keys=True)

    def describe(self) -> str:
        return f"{self.kind}#{self.id}"


def _eval_slot(kind: str, s: dict, grid: GridSpec) -> np.ndarray:
    mesh = grid.mesh
    if kind == "const":
        return np.full(grid.shape, float(s["value"]))
    if kind == "gaussian-packet":
        c = np.asarray(s["center"])
        r2 = ((mesh - c) ** 2).sum(-1)
        return s["amp"] * np.exp(-r2 / (2 * s["sigma"] ** 2)) * np.cos(s["omega"] * mesh[..., 0] + s["phase"])
    if kind == "trig-band":
        out = np.zeros(grid.shape)
        for k, a, ph in zip(s["modes"], s["amps"], s["phases"]):
            arg = (math.pi / grid.L) * (mesh * np.asarray(k)).sum(-1)
            out += a * np.cos(arg + ph)
        return out
    if kind == "bump-train":
        out = np.zeros(grid.shape)
        for c, r, a in zip(s["centers"], s["radii"], s["amps"]):
            d = np.sqrt(((mesh - np.asarray(c)) ** 2).sum(-1))
            out += a * _bump(d / r)
        return out
    raise ValueError(f"unknown family kind {kind!r}")


def _draw_slot(kind: str, rng: np.random.Generator, n: int, L: float) -> dict:
    if kind == "gaussian-packet":
        return {
            # packets vanish to roundoff at the box edge, so the periodic wrap adds no jump
            "center": rng.uniform(-L / 4, L / 4, size=n).tolist(),
            "sigma": float(rng.uniform(0.5, max(0.5, min(1.0, L / 8)))),
            "omega": float(rng.uniform(0.0, 2.0)),
            "phase": float(rng.uniform(0.0, 2 * math.pi)),
            "amp": float(rng.uniform(0.5, 2.0)),
        }
    if kind == "trig-band":
        K = 4
        nm = int(rng.integers(2, 5))
        modes = rng.integers(0, K + 1, size=(nm, n)).tolist()
        return {
            "modes": modes,
            "amps": rng.uniform(-1.0, 1.0, size=nm).tolist(),
            "phases": rng.uniform(0.0, 2 * math.pi, size=nm).tolist(),
        }
    if kind == "bump-train":
        nb = int(rng.integers(2, 5))
        edges = np.linspace(-L + 1, L - 1, nb + 1)
        seg = edges[1] - edges[0]
        radii = rng.uniform(0.25, 0.45, size=nb) * seg
        c1 = edges[:-1] + seg / 2 + rng.uniform(-1, 1, size=nb) * (seg / 2 - radii)
        centers = [[float(c)] + rng.uniform(-L / 2, L / 2, size=n - 1).tolist() for c in c1]
        amps = (rng.uniform(0.5, 2.0, size=nb) * rng.choice([-1.0, 1.0], size=nb)).tolist()
        return {"centers": centers, "radii": radii.tolist(), "amps": amps}
    raise ValueError(f"unknown family kind {kind!r}")


def make_family(kind: str, count: int, seed: int, m: int, n: int, L: float) -> list[Instance]:
    out = []
    for i in range(count):
        rng = instance_rng(seed, kind, i)
        out.append(Instance(i, kind, tuple(_draw_slot(kind, rng, n, L) for _ in range(m))))
    return out


def constant_instance(values, index: int = 0) -> Instance:
    return Instance(index, "const", tuple({"value": float(v)} for v in values))
