"""Growth weights: classical flatness fails, the growth envelope does not.

Run with ``python demos/growth_weights.py``.
"""
import numpy as np

from multicz.grid import Ball, Weight, centered_family, fit_growth, make_grid
from multicz.weights import WeightRecipe, WeightVector, ap_quantity, certify, multi_ap_quantity

g = make_grid(1, 8, 1024)
w = Weight(g, (1 + np.abs(g.axis)) ** 2)

print("ball quantities of (1+|x|)^2 at p = 2")
samples = []
for r in (1, 2, 4, 8):
    q = ap_quantity(w, 2, Ball(0.0, r))
    samples.append((r, q))
    print(f"  r = {r:>2}: {q:.4f}")

cert = certify(w, 2, centered_family(g, [1, 2, 4, 8]))
flat = fit_growth(samples, theta=0.0)
print(f"growth fit: C = {cert.fit.C:.3f}, theta = {cert.fit.theta:.3f} ({cert.verdict})")
print(f"theta = 0 fit leaves a {100 * flat.max_residual:.0f}% excess")

# a pair of generator weights and their combined quantity
w1 = WeightRecipe(0.1, (1.0,), 0.3, 1.0).sample(g)
w2 = WeightRecipe(0.1, (-1.0,), -0.3, 1.0).sample(g)
wv = WeightVector((w1, w2), (2.0, 2.0))
for r in (1, 4):
    print(f"multi quantity on B(0,{r}): {multi_ap_quantity(wv, Ball(0.0, r)):.4f}")
