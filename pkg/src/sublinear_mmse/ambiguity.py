"""Polytope ambiguity sets: convex hulls of equivalent vertex measures.

The sublinear operator ``rho(xi) = max_{P in hull} E_P[xi]`` is evaluated
exactly by vertex enumeration, because ``E_P[xi]`` is linear in ``P``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.stats import qmc

from .space import SUM_TOL, Measure, Partition, SampleSpace

HULL_TOL = 1e-9
#: vertex sets larger than this are only spot-checked by :func:`stability_check`
STABILITY_VERTEX_LIMIT = 64
#: exhaustive node-wise tree vertices are enumerated up to this depth
EXHAUSTIVE_TREE_DEPTH = 4


@dataclass(frozen=True, eq=False)
class AmbiguitySet:
    """Convex hull of ``k >= 1`` vertex measures on a shared space.

    ``weights`` is the ``k x n`` matrix whose rows are the vertices.
    """

    space: SampleSpace
    weights: np.ndarray

    def __post_init__(self):
        v = np.array(self.weights, dtype=float, ndmin=2)
        if v.ndim != 2 or v.shape[1] != self.space.size or v.shape[0] < 1:
            raise ValueError(f"vertex matrix must be k x {self.space.size}, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("vertex weights must be finite and nonnegative")
        bad = np.flatnonzero(np.abs(v.sum(axis=1) - 1.0) > SUM_TOL)
        if bad.size:
            raise ValueError(f"vertex {int(bad[0])} does not sum to 1")
        if np.any(v <= 0):
            j = int(np.flatnonzero((v <= 0).any(axis=1))[0])
            raise ValueError(f"vertex {j} is not equivalent to P0 (it has a null atom)")
        v.setflags(write=False)
        object.__setattr__(self, "weights", v)

    @classmethod
    def from_measures(cls, measures: Sequence[Measure]) -> "AmbiguitySet":
        space = measures[0].space
        if any(m.space != space for m in measures):
            raise ValueError("vertices must live on the same sample space")
        return cls(space, np.stack([m.weights for m in measures]))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def vertices(self) -> list:
        return [Measure(self.space, row) for row in self.weights]

    @property
    def densities(self) -> np.ndarray:
        return self.weights / self.space.base_weights

    def barycenter(self) -> np.ndarray:
        return np.full(self.k, 1.0 / self.k)


def check_mixture(w, k: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (k,):
        raise ValueError(f"mixture weights have shape {w.shape}, expected ({k},)")
    if np.any(w < 0):
        raise ValueError("mixture weights must be nonnegative")
    if abs(w.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"mixture weights sum to {w.sum()!r}, not 1")
    return w


def mix(a: AmbiguitySet, w) -> Measure:
    w = check_mixture(w, a.k)
    p = w @ a.weights
    # keep the result a probability vector despite rounding
    return Measure(a.space, p / p.sum())


def rho(xi, a: AmbiguitySet) -> tuple[float, int]:
    """Sublinear expectation and the lowest-index vertex attaining it."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (a.space.size,):
        raise ValueError(f"shape mismatch: variable {xi.shape} vs space of {a.space.size} atoms")
    values = a.weights @ xi
    j = int(np.argmax(values))
    return float(values[j]), j


def rho_residual_sq(xi, eta, a: AmbiguitySet) -> float:
    """rho((xi - eta)^2): the worst-case mean square error of the estimate ``eta``."""
    r = np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float)
    return rho(r * r, a)[0]


def g_transform(p: Measure, c: Partition) -> Measure:
    """Measure with density f^P / f^P_C, i.e. weight p(w) P0(B) / p(B) on block B."""
    mass = c.block_sums(p.weights)
    if np.any(mass <= 0):
        raise ValueError("a partition block has zero mass under p")
    base_mass = c.block_sums(p.space.base_weights)
    g = p.weights * (base_mass / mass)[c.labels]
    return Measure(p.space, g / g.sum())


def hull_residual(a: AmbiguitySet, density) -> tuple[float, np.ndarray]:
    """Distance of ``density`` from the density hull of ``a``.

    Solves ``min ||sum_j v_j f_j - g||`` over the probability simplex as a
    nonnegative least-squares problem with the sum-to-one row appended.
    Returns the max-norm of the residual and the coefficients ``v``.
    """
    g = np.asarray(density, dtype=float)
    A = np.vstack([a.densities.T, np.ones(a.k)])
    b = np.append(g, 1.0)
    v, _ = nnls(A, b, maxiter=50 * max(a.k, 10))
    return float(np.max(np.abs(A @ v - b))), v


@dataclass(frozen=True)
class StabilityReport:
    checked_points: int
    worst_violation: float
    verdict: str  # "stable" | "violated" | "inconclusive"
    tolerance: float
    worst_mixture: tuple = ()  # (vertex index, weight) pairs of the worst point

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def _simplex_samples(k: int, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy points on the (k-1)-simplex via uniform spacings."""
    if k == 1:
        return np.ones((count, 1))
    u = qmc.Halton(d=k - 1, scramble=True, seed=seed).random(count)
    u.sort(axis=1)
    edges = np.hstack([np.zeros((count, 1)), u, np.ones((count, 1))])
    return np.diff(edges, axis=1)


def _stability_design(k: int, sample_count: int, seed: int):
    """Yield sparse mixtures ``(indices, weights)`` to be checked."""
    if k <= STABILITY_VERTEX_LIMIT:
        everything = np.arange(k)
        for j in range(k):
            yield np.array([j]), np.array([1.0])
        yield everything, np.full(k, 1.0 / k)
        for w in _simplex_samples(k, sample_count, seed):
            yield everything, w
        return
    # too many vertices: random vertices plus mixtures of random 4-subsets
    rng = np.random.default_rng(seed)
    for j in rng.choice(k, size=sample_count, replace=False):
        yield np.array([j]), np.array([1.0])
    yield np.arange(k), np.full(k, 1.0 / k)
    for w in _simplex_samples(4, sample_count, seed):
        yield rng.choice(k, size=4, replace=False), w


def stability_check(
    a: AmbiguitySet,
    c: Partition,
    sample_count: int = 256,
    tol: float = HULL_TOL,
    seed: int = 0,
) -> StabilityReport:
    """Sampled certificate that the hull is closed under ``P -> g_transform(P, C)``.

    Checks every vertex, the barycenter and ``sample_count`` low-discrepancy
    mixtures. A pass is evidence, not proof, because the transform is
    nonlinear in ``P``; it is reported as "inconclusive" when the vertex set
    was too large to check exhaustively.
    """
    if sample_count < min(a.k, STABILITY_VERTEX_LIMIT):
        raise ValueError("sample_count must be at least the number of vertices")
    worst, worst_mix, checked = 0.0, (), 0
    for idx, w in _stability_design(a.k, sample_count, seed):
        p = w @ a.weights[idx]
        res, _ = hull_residual(a, g_transform(Measure(a.space, p / p.sum()), c).density)
        checked += 1
        if res > worst:
            worst = res
            worst_mix = tuple((int(i), float(x)) for i, x in zip(idx, w) if x > 0)
    if worst > tol:
        verdict = "violated"
    elif a.k > STABILITY_VERTEX_LIMIT:
        verdict = "inconclusive"
    else:
        verdict = "stable"
    return StabilityReport(checked, worst, verdict, tol, worst_mix)


# -- binomial tree with node-wise drift ------------------------------------

@dataclass(frozen=True, eq=False)
class TreeSet:
    space: SampleSpace
    ambiguity: AmbiguitySet
    filtration: list  # F_0 (trivial) ... F_depth (finest)
    regime: str  # "node-wise" (exact pasting) or "time-homogeneous" (approximate)
    depth: int
    tilt: float
    steps: np.ndarray  # atoms x depth matrix of +-1 increments

    def __iter__(self):
        return iter((self.space, self.ambiguity, self.filtration))


def tree_paths(depth: int) -> np.ndarray:
    """All +-1 paths of length ``depth``; row i is atom i, -1 sorts before +1."""
    bits = (np.arange(2**depth)[:, None] >> np.arange(depth - 1, -1, -1)) & 1
    return 2 * bits - 1


def tree_filtration(depth: int) -> list:
    idx = np.arange(2**depth)
    return [Partition.from_labels(idx >> (depth - t)) for t in range(depth + 1)]


def tree_measures(steps: np.ndarray, drifts: np.ndarray, tilt: float) -> np.ndarray:
    """Path weights for each row of ``drifts`` (vertices x nodes, entries in [-1, 1]).

    Node ``2**s - 1 + prefix`` governs step ``s`` after the path prefix
    ``prefix`` (binary, +1 = 1); it moves up with probability
    ``(1 + tilt * drift) / 2``.
    """
    n_atoms, depth = steps.shape
    bits = (steps + 1) // 2
    weights = np.ones((drifts.shape[0], n_atoms))
    prefix = np.zeros(n_atoms, dtype=np.intp)
    for s in range(depth):
        node = (2**s - 1) + prefix
        mu = drifts[:, node]  # vertices x atoms
        weights *= (1.0 + tilt * mu * steps[:, s]) / 2.0
        prefix = 2 * prefix + bits[:, s]
    return weights


def pasting_construct(depth: int, tilt: float) -> TreeSet:
    """Binomial tree with uniform P0 and a drift-tilted ambiguity set.

    For ``depth <= 4`` every node picks its own drift in {+1, -1}; the hull of
    these ``2**(2**depth - 1)`` measures is closed under pasting. Deeper trees
    fall back to the ``2**depth`` drifts that depend on time only, for which
    stability holds only approximately.
    """
    if not 1 <= depth <= 12:
        raise ValueError("depth must be in [1, 12]")
    if not 0 < tilt < 1:
        raise ValueError("tilt must lie in (0, 1)")
    steps = tree_paths(depth)
    n_nodes = 2**depth - 1
    if depth <= EXHAUSTIVE_TREE_DEPTH:
        drifts = np.array(list(itertools.product((1.0, -1.0), repeat=n_nodes)))
        regime = "node-wise"
    else:
        per_time = np.array(list(itertools.product((1.0, -1.0), repeat=depth)))
        level = np.repeat(np.arange(depth), 2 ** np.arange(depth))
        drifts = per_time[:, level]
        regime = "time-homogeneous"
    weights = tree_measures(steps, drifts, tilt)
    atoms = ["".join("+" if x > 0 else "-" for x in row) for row in steps]
    space = SampleSpace.uniform(atoms)
    weights = weights / weights.sum(axis=1, keepdims=True)
    return TreeSet(space, AmbiguitySet(space, weights), tree_filtration(depth), regime, depth, tilt, steps)
