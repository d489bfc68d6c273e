"""Grid exports for external plotting: CSV tables and flat binary with a JSON header."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import GridFunction, GridSpec, make_grid

__all__ = ["write_grid_csv", "read_grid_csv", "write_grid_binary", "read_grid_binary"]


def write_grid_csv(f: GridFunction, path) -> Path:
    """One row per lattice point: coordinates then value (``re``/``im`` if complex)."""
    path = Path(path)
    g = f.grid
    pts = g.points
    vals = f.values.ravel()
    cplx = np.iscomplexobj(vals)
    coord = ["x"] if g.n == 1 else [f"x{i + 1}" for i in range(g.n)]
    head = coord + (["re", "im"] if cplx else ["value"])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for p, v in zip(pts, vals):
            tail = [repr(float(v.real)), repr(float(v.imag))] if cplx else [repr(float(v))]
            w.writerow([repr(float(c)) for c in p] + tail)
    return path


def read_grid_csv(path, grid: GridSpec) -> GridFunction:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], float)
    if "re" in head:
        vals = body[:, -2] + 1j * body[:, -1]
    else:
        vals = body[:, -1]
    return GridFunction(grid, vals.reshape(grid.shape))


def write_grid_binary(f: GridFunction, path) -> Path:
    """Raw little-endian C-order array at ``path`` plus ``path.json`` describing it."""
    path = Path(path)
    arr = np.ascontiguousarray(f.values)
    dtype = "<c16" if np.iscomplexobj(arr) else "<f8"
    arr.astype(dtype).tofile(path)
    meta = {"n": f.grid.n, "L": f.grid.L, "G": f.grid.G, "dtype": dtype, "shape": list(arr.shape), "order": "C"}
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True))
    return path


def read_grid_binary(path) -> GridFunction:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    grid = make_grid(meta["n"], meta["L"], meta["G"])
    vals = np.fromfile(path, dtype=meta["dtype"]).reshape(meta["shape"])
    return GridFunction(grid, vals)
