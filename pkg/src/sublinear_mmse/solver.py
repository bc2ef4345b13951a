"""Minimum mean square estimation under a polytope sublinear expectation.

The estimator solves ``min_eta max_{P in hull} E_P[(xi - eta)^2]`` over
C-measurable ``eta``. Swapping min and max, the inner minimum is the
conditional variance

    G(P) = E_P[(xi - E_P[xi | C])^2],

which is concave in ``P``. We maximize ``G`` over the mixture weights of the
hull by Frank-Wolfe with away steps; the worst-case measure ``P_hat`` gives
the estimator ``eta_hat = E_{P_hat}[xi | C]``. The duality gap
``rho((xi - eta_w)^2) - G(w)`` certifies the saddle point.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ambiguity import AmbiguitySet, check_mixture
from .space import Partition

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
LINE_SEARCH_ITERS = 60
#: iterates whose lightest block falls below this are nudged to the barycenter
MIN_BLOCK_MASS = 1e-14
BARYCENTER_PULL = 1e-12


class _Problem:
    """Arrays shared by every evaluation for one (xi, hull, partition) triple."""

    def __init__(self, xi, a: AmbiguitySet, c: Partition):
        self.xi = np.asarray(xi, dtype=float)
        if self.xi.shape != (a.space.size,) or c.size != a.space.size:
            raise ValueError("variable, ambiguity set and partition disagree on the atom count")
        if not np.all(np.isfinite(self.xi)):
            raise ValueError("xi must be finite")
        self.V = a.weights
        self.ind = c.indicator
        self.labels = c.labels
        self.k = a.k

    def estimate(self, w):
        """eta_w = E_{P_w}[xi | C] per atom, plus the block masses of P_w."""
        p = w @ self.V
        mass = p @ self.ind
        if np.any(mass <= 0):
            raise ValueError("mixture has a block with zero mass")
        eta_b = ((p * self.xi) @ self.ind) / mass
        return eta_b[self.labels], mass

    def grad(self, w):
        eta, _ = self.estimate(w)
        r = self.xi - eta
        return self.V @ (r * r), eta


def objective_G(w, xi, a: AmbiguitySet, c: Partition) -> float:
    """Conditional variance of ``xi`` given C under the mixture ``P_w``."""
    w = check_mixture(w, a.k)
    g, _ = _Problem(xi, a, c).grad(w)
    return float(w @ g)


def gradient_G(w, xi, a: AmbiguitySet, c: Partition) -> np.ndarray:
    """Component j is E_{P_j}[(xi - eta_w)^2] (envelope theorem)."""
    w = check_mixture(w, a.k)
    g, _ = _Problem(xi, a, c).grad(w)
    return g


@dataclass(frozen=True, eq=False)
class EstimatorSolution:
    eta_hat: np.ndarray  # per atom, constant on blocks
    w_hat: np.ndarray
    alpha: float
    gap: float
    iterations: int
    converged: bool
    partition: Partition

    @property
    def eta_blocks(self) -> np.ndarray:
        return np.array([self.eta_hat[b[0]] for b in self.partition.blocks])

    @property
    def upper(self) -> float:
        """rho((xi - eta_hat)^2); equals ``alpha + gap``."""
        return self.alpha + self.gap


def _line_search(prob: _Problem, w, d, gamma_max: float) -> float:
    """Maximize the concave slice ``G(w + t d)`` on ``[0, gamma_max]`` by derivative bisection."""

    def slope(t):
        g, _ = prob.grad(w + t * d)
        return float(d @ g)

    if slope(gamma_max) >= 0:
        return gamma_max
    lo, hi = 0.0, gamma_max
    # keep the final bracket near 2**-60 even for long away steps
    iters = LINE_SEARCH_ITERS + max(0, int(np.ceil(np.log2(gamma_max))))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_mmse(
    xi,
    a: AmbiguitySet,
    c: Partition,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    w0=None,
) -> EstimatorSolution:
    """Minimum mean square estimator of ``xi`` given the partition ``c``.

    Runs Frank-Wolfe ascent (with away steps) on ``G`` over the vertex weights
    from ``w0`` (default: barycenter) until the duality gap is at most
    ``tol``. Non-convergence is reported through ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    prob = _Problem(xi, a, c)
    k = a.k
    w = a.barycenter() if w0 is None else check_mixture(w0, k).copy()
    bary = a.barycenter()

    it = 0
    while True:
        _, mass = prob.estimate(w)
        if mass.min() < MIN_BLOCK_MASS:
            w = (1 - BARYCENTER_PULL) * w + BARYCENTER_PULL * bary
        g, eta = prob.grad(w)
        G = float(w @ g)
        j = int(np.argmax(g))
        gap = float(g[j]) - G
        if gap <= tol or it >= max_iter:
            break
        it += 1

        active = np.flatnonzero(w > 0)
        away = int(active[np.argmin(g[active])])
        away_gain = G - float(g[away])
        if gap >= away_gain or w[away] >= 1.0:
            d = -w.copy()
            d[j] += 1.0
            gamma_max = 1.0
            drop = None
        else:
            d = w.copy()
            d[away] -= 1.0
            gamma_max = w[away] / (1.0 - w[away])
            drop = away
        gamma = _line_search(prob, w, d, gamma_max)
        w = w + gamma * d
        if drop is not None and gamma == gamma_max:
            w[drop] = 0.0
        w = np.clip(w, 0.0, None)
        w /= w.sum()

    converged = gap <= tol
    if not converged:
        log.warning("solve_mmse stopped after %d iterations with gap %.3g > tol %.3g", it, gap, tol)
    eta.setflags(write=False)
    w.setflags(write=False)
    return EstimatorSolution(eta, w, G, gap, it, converged, c)


@dataclass(frozen=True)
class SaddleReport:
    passed: bool
    left_margin: float  # center - max_j E_{P_j}[(xi - eta_hat)^2]
    right_margin: float  # min over competitors of E_{P_hat}[(xi - eta)^2] - center
    center: float  # E_{P_hat}[(xi - eta_hat)^2]
    worst_vertex: int
    worst_competitor: str


def verify_saddle(
    sol: EstimatorSolution, xi, a: AmbiguitySet, c: Partition, tol: float = DEFAULT_TOL
) -> SaddleReport:
    """Check both saddle inequalities for ``(sol.eta_hat, P_{sol.w_hat})``.

    Left: no vertex (hence no member of the hull) does worse against
    ``eta_hat`` than ``P_hat``. Right: under ``P_hat`` no competing estimator
    beats ``eta_hat``; competitors are block-wise perturbations and the
    conditional expectations under every vertex and under ``P_hat`` itself.
    """
    xi = np.asarray(xi, dtype=float)
    w = check_mixture(sol.w_hat, a.k)
    p_hat = w @ a.weights
    eta = np.asarray(sol.eta_hat, dtype=float)
    r2 = (xi - eta) ** 2
    center = float(p_hat @ r2)
    per_vertex = a.weights @ r2
    worst_vertex = int(np.argmax(per_vertex))
    left = center - float(per_vertex[worst_vertex])

    names, candidates = [], []
    for bi, block in enumerate(c.blocks):
        for delta in (1e-3, 1e-1):
            for sign in (1.0, -1.0):
                e = eta.copy()
                e[list(block)] += sign * delta
                names.append(f"block {bi} {'+' if sign > 0 else '-'}{delta:g}")
                candidates.append(e)
    prob = _Problem(xi, a, c)
    for jv in range(a.k):
        names.append(f"E_P{jv}[xi|C]")
        candidates.append(prob.estimate(np.eye(1, a.k, jv)[0])[0])
    names.append("E_Phat[xi|C]")
    candidates.append(prob.estimate(w)[0])
    C = np.array(candidates)
    values = ((xi - C) ** 2) @ p_hat
    best = int(np.argmin(values))
    right = float(values[best]) - center
    return SaddleReport(
        passed=bool(left >= -tol and right >= -tol),
        left_margin=left,
        right_margin=right,
        center=center,
        worst_vertex=worst_vertex,
        worst_competitor=names[best],
    )


@dataclass(frozen=True, eq=False)
class UniquenessReport:
    agree: bool
    eta_spread: float  # max block-wise spread of eta_hat across restarts
    w_spread: float  # max coordinate spread of w_hat across restarts
    distinct_w: int  # restarts with w_hat differing by more than the agreement tolerance
    solutions: tuple


def uniqueness_probe(
    xi,
    a: AmbiguitySet,
    c: Partition,
    tol: float = DEFAULT_TOL,
    restarts: int = 8,
    seed: int = 0,
    eta_tol: float = 1e-7,
    max_iter: int = DEFAULT_MAX_ITER,
    parallel: bool = False,
) -> UniquenessReport:
    """Solve from every vertex, the barycenter and random starts; compare the results.

    Only ``eta_hat`` is claimed unique. Differences in ``w_hat`` are reported,
    never asserted.
    """
    if restarts < 2:
        raise ValueError("restarts must be >= 2")
    k = a.k
    rng = np.random.default_rng(seed)
    starts = [np.eye(1, k, j)[0] for j in range(k)] + [a.barycenter()]
    starts += list(rng.dirichlet(np.ones(k), size=max(restarts - k - 1, 0)))

    def run(w0):
        return solve_mmse(xi, a, c, tol=tol, max_iter=max_iter, w0=w0)

    if parallel:
        with ThreadPoolExecutor() as pool:
            sols = list(pool.map(run, starts))
    else:
        sols = [run(w0) for w0 in starts]
    etas = np.array([s.eta_hat for s in sols])
    ws = np.array([s.w_hat for s in sols])
    eta_spread = float(np.max(np.ptp(etas, axis=0)))
    w_spread = float(np.max(np.ptp(ws, axis=0)))
    distinct = [ws[0]]
    for w in ws[1:]:
        if all(np.max(np.abs(w - u)) > eta_tol for u in distinct):
            distinct.append(w)
    return UniquenessReport(eta_spread <= eta_tol, eta_spread, w_spread, len(distinct), tuple(sols))
