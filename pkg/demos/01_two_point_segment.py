"""Two atoms, no information, a segment of two measures.

The worst-case expectation of xi picks the vertex that loads the larger
value; the minimax estimator instead sits at the mixture that makes xi
hardest to predict, here the midpoint of the segment.
"""
import numpy as np

from sublinear_mmse import example_41, objective_G, rho, solve_mmse, verify_saddle

scen = example_41()
a, c, xi = scen.ambiguity, scen.partition, scen.xi
print("vertices:\n", a.weights)
print("xi:", xi)

value, j = rho(xi, a)
print(f"rho(xi) = {value:.12g} at vertex {j}")  # 14/3

# G along the segment w = (lam, 1 - lam) is a downward parabola
for lam in np.linspace(0, 1, 5):
    print(f"  lam={lam:.2f}  G={objective_G([lam, 1 - lam], xi, a, c):.6f}")

sol = solve_mmse(xi, a, c)
print("eta_hat:", sol.eta_blocks, " w_hat:", sol.w_hat, " alpha:", sol.alpha, " gap:", sol.gap)

rep = verify_saddle(sol, xi, a, c)
print("saddle certified:", rep.passed, f"(margins {rep.left_margin:.2g}, {rep.right_margin:.2g})")

# the answer does not depend on the base measure, only on the hull
other = example_41([0.1, 0.9])
print("eta_hat under another P0:", solve_mmse(other.xi, other.ambiguity, other.partition).eta_blocks)
