"""Randomized property suite and scenario generators.

Used by the ``props`` command and by the test-suite. Every generator takes a
``numpy.random.Generator`` so runs are reproducible from a seed.
"""
from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import (
    AmbiguitySet,
    g_transform,
    mix,
    pasting_construct,
    rho,
    stability_check,
    tree_filtration,
    tree_measures,
    tree_paths,
)
from .oracle import curvature_bound, grid_maximize_G, mixture_identity_check
from .scenarios import Scenario
from .solver import gradient_G, objective_G, solve_mmse, uniqueness_probe, verify_saddle
from .space import Partition, SampleSpace, cond_density, cond_expectation, expectation

WEIGHT_FLOOR = 0.01


def bounded_simplex(rng, n: int, size=None) -> np.ndarray:
    """Dirichlet(1) draws squeezed so every coordinate is at least ``WEIGHT_FLOOR``."""
    raw = rng.dirichlet(np.ones(n), size=size)
    out = WEIGHT_FLOOR + (1.0 - WEIGHT_FLOOR * n) * raw
    return out / out.sum(axis=-1, keepdims=True)


def random_partition(rng, n: int, max_blocks: int | None = None) -> Partition:
    top = n if max_blocks is None else min(n, max_blocks)
    nb = int(rng.integers(1, top + 1))
    labels = rng.permutation(np.concatenate([np.arange(nb), rng.integers(0, nb, size=n - nb)]))
    return Partition.from_labels(labels)


def random_scenario(rng, atoms=(2, 6), vertices=(2, 4), max_blocks=None) -> Scenario:
    n = int(rng.integers(atoms[0], atoms[1] + 1))
    k = int(rng.integers(vertices[0], vertices[1] + 1))
    space = SampleSpace(tuple(f"a{i}" for i in range(n)), bounded_simplex(rng, n))
    a = AmbiguitySet(space, bounded_simplex(rng, n, size=k))
    xi = np.round(rng.normal(scale=3.0, size=n), 6)
    return Scenario(space, random_partition(rng, n, max_blocks), a, xi, "random")


def random_stable_scenario(rng) -> Scenario:
    """A scenario whose hull is stable under conditioning on its partition.

    Half are node-wise drift trees with information F_t, half are random
    segments under trivial information.
    """
    if rng.random() < 0.5:
        depth = int(rng.integers(1, 3))
        tilt = float(rng.uniform(0.05, 0.95))
        tree = pasting_construct(depth, tilt)
        t = int(rng.integers(0, depth))
        xi = np.round(rng.normal(scale=2.0, size=tree.space.size), 6)
        return Scenario(tree.space, tree.filtration[t], tree.ambiguity, xi, "tree",
                        filtration=list(tree.filtration))
    n = int(rng.integers(2, 7))
    space = SampleSpace(tuple(f"a{i}" for i in range(n)), bounded_simplex(rng, n))
    a = AmbiguitySet(space, bounded_simplex(rng, n, size=2))
    xi = np.round(rng.normal(scale=3.0, size=n), 6)
    return Scenario(space, Partition.trivial(n), a, xi, "segment")


def independent_scenario(rng) -> Scenario:
    """Tree where, under every member of the hull, xi is independent of F_t.

    Steps up to ``t`` are fair coin flips for every vertex; later steps carry a
    drift that depends on time only, and ``xi`` depends on later steps only.
    Every vertex shares the law of F_t, so mixtures keep the independence.
    """
    depth = int(rng.integers(2, 4))
    t = int(rng.integers(1, depth))
    tilt = float(rng.uniform(0.1, 0.9))
    steps = tree_paths(depth)
    level = np.repeat(np.arange(depth), 2 ** np.arange(depth))
    per_time = np.array(list(itertools.product((1.0, -1.0), repeat=depth - t)))
    drifts = np.zeros((per_time.shape[0], level.size))
    drifts[:, level >= t] = per_time[:, level[level >= t] - t]
    weights = tree_measures(steps, drifts, tilt)
    atoms = ["".join("+" if x > 0 else "-" for x in row) for row in steps]
    space = SampleSpace.uniform(atoms)
    a = AmbiguitySet(space, weights / weights.sum(axis=1, keepdims=True))
    suffix = (np.arange(2**depth) % 2 ** (depth - t))
    values = np.round(rng.normal(scale=2.0, size=2 ** (depth - t)), 6)
    filt = tree_filtration(depth)
    return Scenario(space, filt[t], a, values[suffix], "independent", filtration=filt)


@dataclass
class PropsSummary:
    counts: dict = field(default_factory=dict)  # name -> Counter(pass/fail/flag)

    def record(self, name: str, ok: bool, flag_only: bool = False) -> None:
        c = self.counts.setdefault(name, Counter())
        c["pass" if ok else ("flag" if flag_only else "fail")] += 1

    def merge(self, other: "PropsSummary") -> None:
        for name, c in other.counts.items():
            self.counts.setdefault(name, Counter()).update(c)

    @property
    def failed(self) -> bool:
        return any(c["fail"] for c in self.counts.values())

    def lines(self) -> list:
        out = []
        for name in sorted(self.counts):
            c = self.counts[name]
            status = "FAIL" if c["fail"] else "ok"
            out.append(f"{name:32s} pass={c['pass']:4d} fail={c['fail']:4d} flagged={c['flag']:4d}  {status}")
        return out


def check_case(seed: int, tol: float = 1e-9, max_iter: int = 100_000, inject_bug: bool = False) -> PropsSummary:
    """Run every invariant on one random scenario derived from ``seed``."""
    rng = np.random.default_rng(seed)
    out = PropsSummary()
    scen = random_scenario(rng)
    a, c, xi = scen.ambiguity, scen.partition, scen.xi
    n, k = scen.space.size, a.k

    # sublinear axioms of rho
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    lam = float(rng.uniform(0, 5))
    const = float(rng.normal())
    out.record("rho.monotone", rho(x1, a)[0] >= rho(x1 - np.abs(x2), a)[0] - 1e-12)
    out.record("rho.constant", abs(rho(np.full(n, const), a)[0] - const) <= 1e-12)
    sub = rho(x1 + x2, a)[0] <= rho(x1, a)[0] + rho(x2, a)[0] + 1e-12
    out.record("rho.subadditive", (not sub) if inject_bug else sub)
    out.record("rho.pos_homogeneous", abs(rho(lam * x1, a)[0] - lam * rho(x1, a)[0]) <= 1e-12 * (1 + lam))
    ws = bounded_simplex(rng, k, size=8)
    out.record("rho.dominates", all(rho(x1, a)[0] >= expectation(x1, mix(a, w)) - 1e-12 for w in ws))

    # conditional expectations
    p = mix(a, ws[0])
    ce = cond_expectation(x1, p, c)
    out.record("space.tower", abs(expectation(ce, p) - expectation(x1, p)) <= 1e-12)
    out.record("space.jensen", bool(np.all(cond_expectation(x1**2, p, c) >= ce**2 - 1e-12)))
    out.record("space.block_constant", c.is_measurable(ce))
    base_mass = c.block_sums(scen.space.base_weights)
    out.record("space.cond_density_mass",
               bool(np.allclose(base_mass * cond_density(p, c)[[b[0] for b in c.blocks]],
                                c.block_sums(p.weights), atol=1e-15, rtol=0)))

    # stability transform
    ok_id, ok_dens = True, True
    for v in a.vertices:
        pbar = g_transform(v, c)
        lhs = expectation(x1, pbar)
        rhs = expectation(cond_expectation(x1, v, c), scen.space.base)
        ok_id &= abs(lhs - rhs) <= 1e-12
        ok_dens &= bool(np.allclose(cond_density(pbar, c), 1.0, atol=1e-12, rtol=0))
    out.record("stability.conditioning_identity", ok_id)
    out.record("stability.g_idempotent", ok_dens)

    # concavity and gradient
    w1, w2 = ws[1], ws[2]
    t = float(rng.uniform())
    lhs = objective_G(t * w1 + (1 - t) * w2, xi, a, c)
    out.record("solver.concave", lhs >= t * objective_G(w1, xi, a, c) + (1 - t) * objective_G(w2, xi, a, c) - 1e-10)
    grad = gradient_G(w1, xi, a, c)
    h = 1e-6
    fd_ok = True
    for j in range(k):
        d = np.eye(k)[j] - w1
        fd = (objective_G(w1 + h * d, xi, a, c) - objective_G(w1 - h * d, xi, a, c)) / (2 * h)
        fd_ok &= abs(fd - grad @ d) <= 1e-5 * max(1.0, abs(fd))
    out.record("solver.gradient_fd", fd_ok)

    # solve and certify
    sol = solve_mmse(xi, a, c, tol=tol, max_iter=max_iter)
    out.record("solver.converged", sol.converged)
    out.record("solver.minimax_equality", abs(sol.upper - sol.alpha) <= tol)
    out.record("solver.saddle", verify_saddle(sol, xi, a, c, tol=1e-8).passed)
    out.record("solver.eta_is_cond_exp",
               bool(np.allclose(sol.eta_hat, cond_expectation(xi, mix(a, sol.w_hat), c), atol=1e-9, rtol=0)))

    # estimator properties; flagged rather than failed on unstable hulls
    stable = stability_check(a, c, sample_count=max(16, k)).verdict != "violated"
    eta_tol = 1e-7
    ok = bool(np.all(sol.eta_hat >= xi.min() - eta_tol) and np.all(sol.eta_hat <= xi.max() + eta_tol))
    out.record("estimator.bounds", ok, flag_only=not stable)
    ok = True
    for lam_h in (-2.0, -1.0, 0.5, 3.0):
        s2 = solve_mmse(lam_h * xi, a, c, tol=tol * lam_h**2, max_iter=max_iter)
        ok &= bool(np.max(np.abs(s2.eta_hat - lam_h * sol.eta_hat)) <= eta_tol * (1 + abs(lam_h)))
    out.record("estimator.homogeneous", ok, flag_only=not stable)
    shift = rng.normal(size=c.n_blocks)[c.labels]
    s3 = solve_mmse(xi + shift, a, c, tol=tol, max_iter=max_iter)
    out.record("estimator.translation",
               bool(np.max(np.abs(s3.eta_hat - sol.eta_hat - shift)) <= eta_tol), flag_only=not stable)
    ind = independent_scenario(rng)
    s4 = solve_mmse(ind.xi, ind.ambiguity, ind.partition, tol=tol, max_iter=max_iter)
    out.record("estimator.independence_constant", bool(np.ptp(s4.eta_hat) <= eta_tol))

    # uniqueness of eta_hat
    probe = uniqueness_probe(xi, a, c, tol=tol, restarts=k + 2, seed=seed, max_iter=max_iter)
    out.record("estimator.unique", probe.agree)

    # mixture identity and oracle
    lam_m = float(rng.uniform(0.01, 0.99))
    chk = mixture_identity_check(xi, a.weights[0], a.weights[1], c, lam_m)
    out.record("oracle.mixture_identity", chk.residual <= 1e-10 and chk.share_residual <= 1e-12)
    if k <= 3 and n <= 4:
        step = 0.05
        grid = grid_maximize_G(xi, a, c, step)
        bound = 0.5 * curvature_bound(xi, a, c, grid.best_w) * (k - 1) * step**2 * 2.0
        diff = sol.alpha - grid.best_value
        out.record("oracle.grid_agreement", -tol <= diff <= bound + 1e-12)
    return out


def run_props(cases: int, seed: int = 42, tol: float = 1e-9, max_iter: int = 100_000,
              parallel: bool = False, inject_bug: bool = False) -> PropsSummary:
    seeds = np.random.SeedSequence(seed).generate_state(cases, dtype=np.uint64).tolist()

    def one(s):
        return check_case(int(s), tol=tol, max_iter=max_iter, inject_bug=inject_bug)

    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    total = PropsSummary()
    for r in results:
        total.merge(r)
    return total
