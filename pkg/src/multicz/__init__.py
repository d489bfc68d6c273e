"""Grid-based numerics for multilinear Calderon-Zygmund and pseudodifferential operators
with growth weights and BMO-type symbols.

Submodules: ``grid`` (lattice, balls, norms), ``weights`` (growth-class
certificates), ``bmo`` (oscillation fits), ``maximal`` (critical and local
maximal functions), ``czkernel`` (kernel estimates and quadrature),
``pseudo`` (symbols, Littlewood-Paley pieces, kernel extraction) and
``harness`` (campaigns and the ``multicz`` command).
"""
from .grid import Ball, GridFunction, GridSpec, Weight, make_grid

__version__ = "0.1.0"

__all__ = ["Ball", "GridFunction", "GridSpec", "Weight", "make_grid", "__version__"]
