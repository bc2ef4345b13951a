"""Finite probability spaces, partitions, measures and conditional expectations.

Random variables are plain 1-D float arrays indexed by atom; use
:func:`as_variable` to validate one against a sample space.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

#: atoms lighter than this are rejected by :class:`SampleSpace`
MIN_BASE_WEIGHT = 1e-12
#: weight vectors must sum to one within this
SUM_TOL = 1e-12
#: measures with an atom below this are flagged as badly conditioned
CONDITIONING_THRESHOLD = 1e-12


class ConditioningWarning(UserWarning):
    """An equivalent measure has an atom so light that density ratios are unreliable."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Finite atom list carrying a strictly positive base measure ``P0``."""

    atoms: tuple
    base_weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        w = _frozen(self.base_weights)
        if w.ndim != 1 or len(w) != len(atoms) or len(atoms) == 0:
            raise ValueError("base_weights must be a non-empty vector with one entry per atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom labels must be unique")
        if not np.all(np.isfinite(w)):
            raise ValueError("base weights must be finite")
        if np.any(w < MIN_BASE_WEIGHT):
            raise ValueError(
                f"every atom needs base weight >= {MIN_BASE_WEIGHT:g}; "
                f"got min {w.min():.3g}"
            )
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"base weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "base_weights", w)

    @classmethod
    def uniform(cls, atoms: Sequence) -> "SampleSpace":
        n = len(atoms)
        return cls(tuple(atoms), np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def base(self) -> "Measure":
        return Measure(self, self.base_weights)

    def __eq__(self, other):
        if not isinstance(other, SampleSpace):
            return NotImplemented
        return self.atoms == other.atoms and np.array_equal(self.base_weights, other.base_weights)

    def __hash__(self):
        return hash((self.atoms, self.base_weights.tobytes()))

    def __repr__(self):
        return f"SampleSpace(atoms={list(self.atoms)!r}, base_weights={self.base_weights.tolist()!r})"


def as_variable(space: SampleSpace, values) -> np.ndarray:
    """Validate ``values`` as a random variable on ``space``."""
    xi = np.asarray(values, dtype=float)
    if xi.shape != (space.size,):
        raise ValueError(f"random variable has shape {xi.shape}, expected ({space.size},)")
    if not np.all(np.isfinite(xi)):
        raise ValueError("random variable values must be finite")
    return xi


@dataclass(frozen=True, eq=False)
class Partition:
    """A sub-sigma-algebra of a finite space, stored as disjoint blocks of atom indices.

    Blocks are canonicalized: members sorted, blocks ordered by smallest member.
    ``labels[i]`` is the block index of atom ``i``.
    """

    blocks: tuple
    size: int
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        blocks = [tuple(sorted(int(i) for i in b)) for b in self.blocks]
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        blocks.sort(key=lambda b: b[0])
        seen = [i for b in blocks for i in b]
        if sorted(seen) != list(range(self.size)):
            if len(seen) != len(set(seen)):
                raise ValueError("partition blocks overlap")
            raise ValueError(f"partition blocks must cover atoms 0..{self.size - 1} exactly")
        labels = np.empty(self.size, dtype=np.intp)
        for j, b in enumerate(blocks):
            labels[list(b)] = j
        labels.setflags(write=False)
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls((tuple(range(n)),), n)

    @classmethod
    def finest(cls, n: int) -> "Partition":
        return cls(tuple((i,) for i in range(n)), n)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels)
        groups: dict = {}
        for i, lab in enumerate(labels.tolist()):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(groups.values()), len(labels))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_sums(self, values) -> np.ndarray:
        """Sum ``values`` (last axis = atoms) within each block."""
        return np.asarray(values, dtype=float) @ self.indicator

    @cached_property
    def indicator(self) -> np.ndarray:
        """Atoms x blocks 0/1 membership matrix."""
        onehot = np.zeros((self.size, self.n_blocks))
        onehot[np.arange(self.size), self.labels] = 1.0
        onehot.setflags(write=False)
        return onehot

    def is_measurable(self, values, atol: float = 1e-12) -> bool:
        """True when ``values`` is constant on every block."""
        values = np.asarray(values, dtype=float)
        return all(np.ptp(values[list(b)]) <= atol for b in self.blocks)

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` sits inside one block of ``other``."""
        return self.size == other.size and all(
            len(set(other.labels[list(b)].tolist())) == 1 for b in self.blocks
        )

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.size == other.size and self.blocks == other.blocks

    def __hash__(self):
        return hash((self.size, self.blocks))


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability weights on a :class:`SampleSpace`."""

    space: SampleSpace
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.shape != (self.space.size,):
            raise ValueError(f"measure has shape {w.shape}, expected ({self.space.size},)")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("measure weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"measure weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def density(self) -> np.ndarray:
        """Radon-Nikodym derivative dP/dP0 per atom."""
        return self.weights / self.space.base_weights

    @property
    def equivalent(self) -> bool:
        return bool(np.all(self.weights > 0))

    def __repr__(self):
        return f"Measure({self.weights.tolist()!r})"


def expectation(xi, p: Measure) -> float:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != p.weights.shape:
        raise ValueError(f"shape mismatch: variable {xi.shape} vs measure {p.weights.shape}")
    return float(p.weights @ xi)


def block_masses(p: Measure, c: Partition) -> np.ndarray:
    return c.block_sums(p.weights)


def cond_expectation(xi, p: Measure, c: Partition) -> np.ndarray:
    """E_P[xi | C] as a block-constant random variable.

    Raises ``ValueError`` if some block carries no P-mass.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != p.weights.shape or c.size != len(xi):
        raise ValueError("shape mismatch between variable, measure and partition")
    mass = c.block_sums(p.weights)
    if np.any(mass <= 0):
        raise ValueError("a partition block has zero mass; measure is not equivalent to P0")
    return (c.block_sums(p.weights * xi) / mass)[c.labels]


def cond_density(p: Measure, c: Partition) -> np.ndarray:
    """f^P_C = E_P0[dP/dP0 | C], i.e. P(B)/P0(B) on block B."""
    ratio = c.block_sums(p.weights) / c.block_sums(p.space.base_weights)
    return ratio[c.labels]


def check_equivalence(p: Measure) -> bool:
    """Whether ``p`` charges every atom; warns when an atom is nearly null."""
    ok = bool(np.all(p.weights > 0))
    if ok and p.weights.min() < CONDITIONING_THRESHOLD:
        warnings.warn(
            f"measure is equivalent but its lightest atom has weight {p.weights.min():.3g}",
            ConditioningWarning,
            stacklevel=2,
        )
    return ok
