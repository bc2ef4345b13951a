"""Brute-force checks for the solver, small problems only.

Nothing here calls into :mod:`sublinear_mmse.space` or the solver: block
sums, conditional means and variances are recomputed from raw arrays so that
agreement with the solver is not self-confirmation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_GRID_VERTICES = 4
MAX_BRUTE_BLOCKS = 3
MAX_BRUTE_VERTICES = 3
MAX_ETA_GRID = 5_000_000


def _raw(xi, a, c):
    xi = np.asarray(xi, dtype=float)
    V = np.asarray(a.weights, dtype=float)
    blocks = [np.asarray(b, dtype=int) for b in c.blocks]
    return xi, V, blocks


def _variance_given_blocks(P, xi, blocks):
    """sum_B [ sum_B p xi^2 - (sum_B p xi)^2 / p(B) ] for each row of P."""
    total = np.zeros(P.shape[0])
    for b in blocks:
        pb = P[:, b]
        xb = xi[b]
        m0 = pb.sum(axis=1)
        m1 = pb @ xb
        m2 = pb @ (xb * xb)
        total += m2 - m1 * m1 / m0
    return total


def _compositions(k: int, m: int) -> np.ndarray:
    """Nonnegative integer rows of length k summing to m, lexicographically ascending."""
    if k == 1:
        return np.array([[m]])
    if k == 2:
        i = np.arange(m + 1)
        return np.stack([i, m - i], axis=1)
    parts = []
    for first in range(m + 1):
        tail = _compositions(k - 1, m - first)
        parts.append(np.hstack([np.full((tail.shape[0], 1), first), tail]))
    return np.vstack(parts)


def simplex_lattice(k: int, m: int) -> np.ndarray:
    """All w with w_j in {0, 1/m, ..., 1} summing to 1, in lexicographic order."""
    return _compositions(k, m) / m


@dataclass(frozen=True)
class GridResult:
    best_w: np.ndarray
    best_value: float
    grid_step: float
    points: int
    lipschitz: float  # bound on |G(w) - G(w')| / ||w - w'||_1 over the simplex


def grid_maximize_G(xi, a, c, step: float) -> GridResult:
    """Maximize the conditional variance over the simplex lattice of spacing ``step``."""
    xi, V, blocks = _raw(xi, a, c)
    k = V.shape[0]
    if k > MAX_GRID_VERTICES:
        raise ValueError(f"grid oracle supports at most {MAX_GRID_VERTICES} vertices, got {k}")
    if not 1e-4 <= step <= 0.25:
        raise ValueError("step must lie in [1e-4, 0.25]")
    m = int(round(1.0 / step))
    best_val, best_w, count = -np.inf, None, 0
    # chunk over the first coordinate to bound memory
    chunks = [_compositions(1, m)] if k == 1 else (
        np.hstack([np.full((t.shape[0], 1), f), t])
        for f in range(m + 1)
        for t in [_compositions(k - 1, m - f)]
    )
    for chunk in chunks:
        W = chunk / m
        vals = _variance_given_blocks(W @ V, xi, blocks)
        count += len(vals)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_w = float(vals[i]), W[i]
    spread = float(xi.max() - xi.min())
    return GridResult(best_w, best_val, 1.0 / m, count, spread * spread)


def curvature_bound(xi, a, c, w, h: float = 1e-4) -> float:
    """Spectral norm of the Hessian of G at ``w`` in reduced coordinates.

    Central differences of the oracle's own G; used to turn grid spacing into
    an a-priori error bound ``0.5 * norm * (k - 1) * step**2``.
    """
    xi, V, blocks = _raw(xi, a, c)
    k = V.shape[0]
    if k == 1:
        return 0.0
    # move w inside so the stencil stays on the simplex
    w = 0.98 * np.asarray(w, dtype=float) + 0.02 / k
    basis = np.vstack([np.eye(k - 1), -np.ones(k - 1)]).T  # reduced -> full directions

    def G(x):
        return _variance_given_blocks((x @ V)[None, :], xi, blocks)[0]

    H = np.empty((k - 1, k - 1))
    for i, j in itertools.product(range(k - 1), repeat=2):
        di, dj = basis[i] * h, basis[j] * h
        H[i, j] = (G(w + di + dj) - G(w + di - dj) - G(w - di + dj) + G(w - di - dj)) / (4 * h * h)
    return float(np.linalg.norm(0.5 * (H + H.T), 2))


@dataclass(frozen=True)
class IdentityCheck:
    residual: float  # |left - right|
    left: float
    right: float
    share_residual: float  # max |lambda_1 + lambda_2 - 1| over blocks
    cross_terms: float


def mixture_identity_check(xi, p1, p2, c, lam: float) -> IdentityCheck:
    """Both sides of the mixture decomposition of the conditional variance.

    With ``P = lam*P1 + (1-lam)*P2`` and block shares
    ``l1 = lam*P1(B)/P(B)``, ``l2 = (1-lam)*P2(B)/P(B)``::

        E_P[(xi - l1*eta1 - l2*eta2)^2]
          = lam E_P1[(xi-eta1)^2] + (1-lam) E_P2[(xi-eta2)^2]
            + lam E_P1[l2^2 (eta1-eta2)^2] + (1-lam) E_P2[l1^2 (eta1-eta2)^2]

    where ``eta_i = E_Pi[xi | C]``.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    xi = np.asarray(xi, dtype=float)
    q1 = np.asarray(getattr(p1, "weights", p1), dtype=float)
    q2 = np.asarray(getattr(p2, "weights", p2), dtype=float)
    if np.any(q1 <= 0) or np.any(q2 <= 0):
        raise ValueError("both measures must charge every atom")
    q = lam * q1 + (1 - lam) * q2
    eta1 = np.empty_like(xi)
    eta2 = np.empty_like(xi)
    l1 = np.empty_like(xi)
    l2 = np.empty_like(xi)
    share = 0.0
    for b in c.blocks:
        b = list(b)
        m1, m2, m = q1[b].sum(), q2[b].sum(), q[b].sum()
        eta1[b] = (q1[b] * xi[b]).sum() / m1
        eta2[b] = (q2[b] * xi[b]).sum() / m2
        l1[b] = lam * m1 / m
        l2[b] = (1 - lam) * m2 / m
        share = max(share, abs(l1[b[0]] + l2[b[0]] - 1.0))
    d2 = (eta1 - eta2) ** 2
    left = float((q * (xi - l1 * eta1 - l2 * eta2) ** 2).sum())
    cross = float(lam * (q1 * l2**2 * d2).sum() + (1 - lam) * (q2 * l1**2 * d2).sum())
    right = float(
        lam * (q1 * (xi - eta1) ** 2).sum() + (1 - lam) * (q2 * (xi - eta2) ** 2).sum() + cross
    )
    return IdentityCheck(abs(left - right), left, right, share, cross)


@dataclass(frozen=True)
class BruteForceResult:
    eta: np.ndarray  # per block, in partition block order
    alpha: float
    eta_step: float
    w_step: float


def brute_force_estimate(xi, a, c, eta_grid_step: float, w_grid_step: float) -> BruteForceResult:
    """Grid search of ``min_eta max_w E_{P_w}[(xi - eta)^2]``.

    Block values range over ``[min xi, max xi]`` in steps of ``eta_grid_step``.
    The objective is linear in ``w`` and the lattice contains every vertex, so
    the search scores each ``eta`` by its worst vertex; the winner is then
    re-scored over the full ``w`` lattice.
    """
    xi, V, blocks = _raw(xi, a, c)
    k = V.shape[0]
    if len(blocks) > MAX_BRUTE_BLOCKS or k > MAX_BRUTE_VERTICES:
        raise ValueError(
            f"brute force supports <= {MAX_BRUTE_BLOCKS} blocks and <= {MAX_BRUTE_VERTICES} vertices"
        )
    lo, hi = float(xi.min()), float(xi.max())
    grid = lo + eta_grid_step * np.arange(int(np.floor((hi - lo) / eta_grid_step + 1e-9)) + 1)
    if grid.size ** len(blocks) > MAX_ETA_GRID:
        raise ValueError("eta grid too large; increase eta_grid_step")
    # per-block, per-vertex loss tables: k x len(grid)
    tables = []
    for b in blocks:
        pb = V[:, b]
        tables.append(((xi[b][None, :, None] - grid[None, None, :]) ** 2 * pb[:, :, None]).sum(axis=1))
    worst = None
    for j in range(k):
        total = tables[0][j]
        for t in tables[1:]:
            total = np.add.outer(total, t[j])
        worst = total if worst is None else np.maximum(worst, total)
    idx = np.unravel_index(int(np.argmin(worst)), worst.shape)
    eta_blocks = grid[list(idx)]

    eta = np.empty_like(xi)
    for b, e in zip(blocks, eta_blocks):
        eta[b] = e
    per_vertex = V @ (xi - eta) ** 2
    m = int(round(1.0 / w_grid_step))
    alpha = float(np.max(simplex_lattice(k, m) @ per_vertex))
    return BruteForceResult(eta_blocks, alpha, eta_grid_step, 1.0 / m)
