"""Binomial tree with drift ambiguity.

Every node may tilt its up-probability to (1 +- tilt)/2. The conditional
worst-case expectation at time 1 is a dynamic-programming quantity; the
minimax estimator given the same information is something else.
"""
import numpy as np

from sublinear_mmse import backward_recursion, conditional_sublinear, example_43_tree, solve_mmse, stability_check

scen, filt = example_43_tree(depth=2, tilt=0.5)
a = scen.ambiguity
print("atoms:", scen.space.atoms, " vertices:", a.k)
for t, f in enumerate(filt):
    print(f"F_{t}: {f.blocks}  stability: {stability_check(a, f).verdict}")

xi = scen.xi  # terminal value of the walk
cs = conditional_sublinear(xi, a, filt)
br = backward_recursion(xi, a, filt)
print("max |vertex esssup - recursion|:", max(np.abs(x - y).max() for x, y in zip(cs, br)))

eta = solve_mmse(xi, a, filt[1]).eta_hat
print("conditional worst case at t=1:", cs[1])
print("minimax estimator at t=1:     ", eta)
print("difference:", cs[1] - eta)  # the drift adds tilt to X_1 in the worst case
