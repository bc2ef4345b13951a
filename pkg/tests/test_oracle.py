from math import comb

import numpy as np
import pytest

from sublinear_mmse.oracle import (
    brute_force_estimate,
    curvature_bound,
    grid_maximize_G,
    mixture_identity_check,
    simplex_lattice,
)
from sublinear_mmse.props import random_scenario
from sublinear_mmse.scenarios import example_41
from sublinear_mmse.solver import objective_G, solve_mmse
from sublinear_mmse.space import Partition


@pytest.mark.parametrize("k,m", [(1, 4), (2, 10), (3, 7), (4, 5)])
def test_simplex_lattice(k, m):
    W = simplex_lattice(k, m)
    assert W.shape == (comb(m + k - 1, k - 1), k)
    assert np.allclose(W.sum(axis=1), 1.0)
    assert np.all(W >= 0)
    assert len({tuple(r) for r in np.round(W * m).astype(int)}) == W.shape[0]


def test_grid_example_41():
    scen = example_41()
    res = grid_maximize_G(scen.xi, scen.ambiguity, scen.partition, 0.01)
    assert res.best_value == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(res.best_w, [0.5, 0.5])
    assert res.points == 101


def test_grid_values_match_solver_objective(rng):
    scen = random_scenario(rng, atoms=(3, 4), vertices=(3, 3))
    res = grid_maximize_G(scen.xi, scen.ambiguity, scen.partition, 0.1)
    assert res.best_value == pytest.approx(
        objective_G(res.best_w, scen.xi, scen.ambiguity, scen.partition), rel=1e-12, abs=1e-12
    )


def test_curvature_of_quadratic_segment():
    # G(l) = 16 q (1 - q) with q = (2 - l)/3 has second derivative -32/9;
    # the reduced coordinate moves w along e_0 - e_1, i.e. along l
    scen = example_41()
    h = curvature_bound(scen.xi, scen.ambiguity, scen.partition, np.array([0.5, 0.5]))
    assert h == pytest.approx(32 / 9, rel=1e-5)


def test_grid_error_within_curvature_bound(rng):
    for _ in range(20):
        scen = random_scenario(rng, atoms=(2, 4), vertices=(2, 3))
        a, c, xi = scen.ambiguity, scen.partition, scen.xi
        sol = solve_mmse(xi, a, c)
        for step in (0.05, 0.02):
            res = grid_maximize_G(xi, a, c, step)
            bound = curvature_bound(xi, a, c, res.best_w) * (a.k - 1) * step**2
            assert -1e-9 <= sol.alpha - res.best_value <= bound + 1e-12


def test_grid_limits():
    scen = example_41()
    with pytest.raises(ValueError):
        grid_maximize_G(scen.xi, scen.ambiguity, scen.partition, 0.5)
    with pytest.raises(ValueError):
        grid_maximize_G(scen.xi, scen.ambiguity, scen.partition, 1e-5)


def test_mixture_identity_random(rng):
    for _ in range(200):
        scen = random_scenario(rng)
        w = scen.ambiguity.weights
        chk = mixture_identity_check(scen.xi, w[0], w[1], scen.partition, rng.uniform(0.01, 0.99))
        assert chk.residual <= 1e-10 * (1 + abs(chk.left))
        assert chk.share_residual <= 1e-12
        assert chk.cross_terms >= 0


def test_mixture_identity_left_is_conditional_variance(rng):
    scen = random_scenario(rng)
    w = scen.ambiguity.weights
    lam = 0.3
    chk = mixture_identity_check(scen.xi, w[0], w[1], scen.partition, lam)
    mix_w = np.zeros(scen.ambiguity.k)
    mix_w[:2] = lam, 1 - lam
    assert chk.left == pytest.approx(objective_G(mix_w, scen.xi, scen.ambiguity, scen.partition), rel=1e-12)


def test_mixture_identity_validation():
    scen = example_41()
    w = scen.ambiguity.weights
    with pytest.raises(ValueError):
        mixture_identity_check(scen.xi, w[0], w[1], scen.partition, 1.0)
    with pytest.raises(ValueError):
        mixture_identity_check(scen.xi, [1.0, 0.0], w[1], scen.partition, 0.5)


def test_brute_force_example_41():
    scen = example_41()
    bf = brute_force_estimate(scen.xi, scen.ambiguity, scen.partition, 1e-3, 1e-2)
    assert bf.eta == pytest.approx([4.0], abs=1e-3)
    assert bf.alpha == pytest.approx(4.0, abs=1e-5)


def test_brute_force_two_blocks(rng):
    scen = random_scenario(rng, atoms=(4, 4), vertices=(2, 3), max_blocks=2)
    a, c, xi = scen.ambiguity, scen.partition, scen.xi
    sol = solve_mmse(xi, a, c)
    step = 2e-3
    bf = brute_force_estimate(xi, a, c, step, 0.05)
    assert bf.alpha >= sol.alpha - 1e-9
    # F is 2 P_hat(B)-strongly convex along block B, so a near-optimal grid point is near eta_hat
    mass = c.block_sums(sol.w_hat @ a.weights)
    rounded = np.round((sol.eta_blocks - xi.min()) / step) * step + xi.min()
    gap_bound = float(np.max(a.weights @ (xi - rounded[c.labels]) ** 2)) - sol.alpha
    assert np.max(np.abs(bf.eta - sol.eta_blocks)) <= np.sqrt(max(gap_bound, 0) / mass.min()) + 1e-9


def test_brute_force_limits():
    scen = example_41()
    with pytest.raises(ValueError, match="too large"):
        brute_force_estimate(scen.xi, scen.ambiguity, Partition.finest(2), 1e-7, 0.1)
