"""Size and smoothness constants: a decaying kernel, a broken one, and a symbol kernel.

Run with ``python demos/kernel_and_symbol.py`` (about 15 s).
"""
import numpy as np

from multicz.czkernel import model_kernel, pure_power_kernel, random_h2_pairs, random_samples, verify_h1, verify_h2
from multicz.grid import make_grid
from multicz.pseudo import (
    LatticeKernel,
    class_samples,
    lattice_h2_pairs,
    lattice_kernel_samples,
    model_symbol,
    root_model_symbol,
    symbol_class_check,
    truncated_symbol,
)

rng = np.random.default_rng(1)


def show(name, rep):
    consts = ", ".join(f"N={N:g}: {rep.C[N]:.3g}" for N in rep.N_list)
    print(f"{name:<22} {consts}  divergent={rep.any_divergent}")


y = random_samples(2, 1, 20000, 8, rng)
show("model kernel H1", verify_h1(model_kernel(2, 1), y, [2, 3, 4]))
show("model kernel H2", verify_h2(model_kernel(2, 1), random_h2_pairs(2, 1, 20000, 8, rng), [1, 2], epsilon=0.5))
show("pure power H1", verify_h1(pure_power_kernel(2, 1), y, [3]))

for a in (model_symbol(), root_model_symbol()):
    chk = symbol_class_check(a, class_samples(2, 1, 10, 40, rng))
    print(f"class check {a.name:<12} divergent={chk.any_divergent}")

g = make_grid(1, 4, 2048)
K = LatticeKernel(truncated_symbol(model_symbol(), 8), g, cache=4).spec(0.5)
ys = lattice_kernel_samples(g, 2, [(1024,), (1300,)], 20000, 512, rng)
show("symbol kernel H1", verify_h1(K, ys, [2, 3, 4]))
show("symbol kernel H2", verify_h2(K, lattice_h2_pairs(ys, g, rng), [1, 2], epsilon=0.5))
