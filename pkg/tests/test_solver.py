import logging

import numpy as np
import pytest

from sublinear_mmse.ambiguity import AmbiguitySet, mix, rho_residual_sq
from sublinear_mmse.props import random_scenario
from sublinear_mmse.scenarios import example_41
from sublinear_mmse.solver import (
    EstimatorSolution,
    gradient_G,
    objective_G,
    solve_mmse,
    uniqueness_probe,
    verify_saddle,
)
from sublinear_mmse.space import Partition, SampleSpace, cond_expectation


def _flat_scenario():
    """Every mixture gives xi the same law, so every w is optimal."""
    s = SampleSpace.uniform("abcd")
    a = AmbiguitySet(s, [[0.1, 0.4, 0.4, 0.1], [0.4, 0.1, 0.1, 0.4]])
    return np.array([0.0, 0.0, 1.0, 1.0]), a, Partition.trivial(4)


def test_example_41():
    scen = example_41()
    sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition)
    assert sol.converged
    assert np.allclose(sol.eta_hat, 4.0, atol=1e-9)
    assert np.allclose(sol.w_hat, [0.5, 0.5], atol=1e-6)
    assert sol.alpha == pytest.approx(4.0, abs=1e-9)
    assert sol.gap <= 1e-9
    assert sol.eta_blocks.tolist() == pytest.approx([4.0])


def test_objective_example_41_closed_form():
    # Var under (l/3 + 2(1-l)/3, ...) of xi in {2, 6} is 16 q (1 - q)
    scen = example_41()
    for lam in (0.0, 0.2, 0.5, 0.9):
        q = lam / 3 + 2 * (1 - lam) / 3
        assert objective_G([lam, 1 - lam], scen.xi, scen.ambiguity, scen.partition) == pytest.approx(
            16 * q * (1 - q), abs=1e-12
        )


def test_objective_equals_w_dot_gradient(rng):
    for _ in range(50):
        scen = random_scenario(rng)
        w = rng.dirichlet(np.ones(scen.ambiguity.k))
        g = gradient_G(w, scen.xi, scen.ambiguity, scen.partition)
        assert w @ g == pytest.approx(objective_G(w, scen.xi, scen.ambiguity, scen.partition), rel=1e-12, abs=1e-12)


def test_gradient_matches_finite_differences(rng):
    scen = random_scenario(rng, vertices=(3, 3))
    a, c, xi = scen.ambiguity, scen.partition, scen.xi
    w = np.array([0.3, 0.3, 0.4])
    g = gradient_G(w, xi, a, c)
    h = 1e-6
    for j in range(3):
        d = np.eye(3)[j] - w
        fd = (objective_G(w + h * d, xi, a, c) - objective_G(w - h * d, xi, a, c)) / (2 * h)
        assert fd == pytest.approx(g @ d, rel=1e-5, abs=1e-6)


def test_objective_is_concave(rng):
    for _ in range(100):
        scen = random_scenario(rng)
        a, c, xi = scen.ambiguity, scen.partition, scen.xi
        w1, w2 = rng.dirichlet(np.ones(a.k), size=2)
        t = rng.uniform()
        mid = objective_G(t * w1 + (1 - t) * w2, xi, a, c)
        assert mid >= t * objective_G(w1, xi, a, c) + (1 - t) * objective_G(w2, xi, a, c) - 1e-10


def test_random_scenarios_converge_and_certify(rng):
    for _ in range(100):
        scen = random_scenario(rng)
        a, c, xi = scen.ambiguity, scen.partition, scen.xi
        sol = solve_mmse(xi, a, c)
        assert sol.converged and sol.gap <= 1e-9
        assert sol.upper == pytest.approx(rho_residual_sq(xi, sol.eta_hat, a), abs=1e-12 * (1 + sol.upper))
        assert c.is_measurable(sol.eta_hat)
        assert np.allclose(sol.eta_hat, cond_expectation(xi, mix(a, sol.w_hat), c), atol=1e-12)
        rep = verify_saddle(sol, xi, a, c, tol=1e-8)
        assert rep.passed, rep


def test_single_vertex_reduces_to_conditional_expectation(rng):
    scen = random_scenario(rng, vertices=(2, 2))
    a1 = AmbiguitySet(scen.space, scen.ambiguity.weights[:1])
    sol = solve_mmse(scen.xi, a1, scen.partition)
    assert sol.gap == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(sol.eta_hat, cond_expectation(scen.xi, a1.vertices[0], scen.partition), atol=1e-12)


def test_finest_partition_returns_xi(rng):
    scen = random_scenario(rng)
    sol = solve_mmse(scen.xi, scen.ambiguity, Partition.finest(scen.space.size))
    assert np.allclose(sol.eta_hat, scen.xi, atol=1e-12)
    assert sol.alpha == pytest.approx(0.0, abs=1e-12)


def test_saddle_rejects_a_wrong_estimate():
    scen = example_41()
    sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition)
    bad = EstimatorSolution(np.full(2, 4.5), sol.w_hat, sol.alpha, sol.gap, 0, True, scen.partition)
    rep = verify_saddle(bad, scen.xi, scen.ambiguity, scen.partition)
    assert not rep.passed
    assert rep.left_margin < -0.5


def test_saddle_rejects_a_wrong_measure():
    scen = example_41()
    sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition)
    bad = EstimatorSolution(sol.eta_hat, np.array([0.9, 0.1]), sol.alpha, sol.gap, 0, True, scen.partition)
    rep = verify_saddle(bad, scen.xi, scen.ambiguity, scen.partition)
    assert not rep.passed
    assert rep.right_margin < 0


def test_non_convergence_is_reported(rng, caplog):
    # find a scenario that needs more than one step
    for _ in range(50):
        scen = random_scenario(rng, vertices=(4, 4))
        if solve_mmse(scen.xi, scen.ambiguity, scen.partition).iterations > 3:
            break
    with caplog.at_level(logging.WARNING, logger="sublinear_mmse.solver"):
        sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition, max_iter=1)
    assert not sol.converged
    assert sol.gap > 1e-9
    assert "stopped after" in caplog.text


def test_loose_tolerance_is_honoured(rng):
    scen = random_scenario(rng)
    sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition, tol=1e-3)
    assert sol.gap <= 1e-3


def test_argument_validation():
    scen = example_41()
    with pytest.raises(ValueError):
        solve_mmse(scen.xi, scen.ambiguity, scen.partition, tol=0)
    with pytest.raises(ValueError):
        solve_mmse(scen.xi, scen.ambiguity, scen.partition, max_iter=0)
    with pytest.raises(ValueError):
        solve_mmse(scen.xi, scen.ambiguity, scen.partition, w0=[0.7, 0.7])
    with pytest.raises(ValueError):
        solve_mmse([1.0, 2.0, 3.0], scen.ambiguity, scen.partition)
    with pytest.raises(ValueError):
        solve_mmse([1.0, np.inf], scen.ambiguity, scen.partition)


def test_large_magnitudes(rng):
    scen = random_scenario(rng)
    scale = 1e6
    base = solve_mmse(scen.xi, scen.ambiguity, scen.partition)
    big = solve_mmse(scale * scen.xi, scen.ambiguity, scen.partition, tol=1e-9 * scale**2)
    assert np.allclose(big.eta_hat / scale, base.eta_hat, atol=1e-6)


def test_uniqueness_probe_agrees(rng):
    scen = random_scenario(rng)
    rep = uniqueness_probe(scen.xi, scen.ambiguity, scen.partition, restarts=8, seed=3)
    assert rep.agree
    assert len(rep.solutions) >= 8


def test_non_unique_weights_share_the_estimate():
    xi, a, c = _flat_scenario()
    rep = uniqueness_probe(xi, a, c, restarts=6)
    assert rep.agree
    assert rep.distinct_w >= 2
    assert rep.w_spread > 0.5
    assert np.allclose(rep.solutions[0].eta_hat, 0.5)


def test_parallel_matches_serial(rng):
    scen = random_scenario(rng)
    args = (scen.xi, scen.ambiguity, scen.partition)
    s1 = uniqueness_probe(*args, restarts=6, seed=1)
    s2 = uniqueness_probe(*args, restarts=6, seed=1, parallel=True)
    for x, y in zip(s1.solutions, s2.solutions):
        assert np.array_equal(x.eta_hat, y.eta_hat)
        assert np.array_equal(x.w_hat, y.w_hat)
