"""Cross-check the solver against brute force on a small random problem.

The grid search over mixture weights approaches the optimum from below at
a rate set by the curvature of G; the brute-force estimator search lands
next to eta_hat.
"""
import numpy as np

from sublinear_mmse import solve_mmse, uniqueness_probe, verify_saddle
from sublinear_mmse.oracle import brute_force_estimate, curvature_bound, grid_maximize_G
from sublinear_mmse.props import random_scenario

rng = np.random.default_rng(7)
scen = random_scenario(rng, atoms=(4, 4), vertices=(3, 3), max_blocks=2)
a, c, xi = scen.ambiguity, scen.partition, scen.xi
print("blocks:", c.blocks, " xi:", xi)

sol = solve_mmse(xi, a, c)
print(f"solver: alpha={sol.alpha:.12g}  w_hat={np.round(sol.w_hat, 6)}  iterations={sol.iterations}")

print(" step       grid best        alpha - grid   C*step^2")
for step in (0.04, 0.02, 0.01, 0.005):
    g = grid_maximize_G(xi, a, c, step)
    C = curvature_bound(xi, a, c, g.best_w) * (a.k - 1)
    print(f"{step:6.3f}  {g.best_value:.12f}  {sol.alpha - g.best_value:10.3g}  {C * step**2:10.3g}")

bf = brute_force_estimate(xi, a, c, 1e-3, 0.05)
print("brute force eta:", bf.eta, " solver eta:", sol.eta_blocks)

probe = uniqueness_probe(xi, a, c, restarts=6)
print(f"restarts agree: {probe.agree} (eta spread {probe.eta_spread:.2g}, w spread {probe.w_spread:.2g})")
print("saddle:", verify_saddle(sol, xi, a, c).passed)
