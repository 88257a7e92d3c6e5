"""Finite probability primitives on the (x1, x2, y) cell lattice.

Joint distributions over the triple (x1, x2, y) are plain numpy arrays of
shape ``(nx1, nx2, ny)``.  All information quantities use natural logarithms
and the 0 log 0 = 0 convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, InfeasibleSupport, UnsupportedMass

Axes = tuple[int, ...]

DIST_ATOL = 1e-9


@dataclass(frozen=True)
class Alphabets:
    """Sizes of the two input alphabets and the output alphabet."""

    nx1: int
    nx2: int
    ny: int

    def __post_init__(self) -> None:
        if min(self.nx1, self.nx2, self.ny) < 1:
            raise ValueError("alphabet sizes must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx1, self.nx2, self.ny)

    @property
    def ncells(self) -> int:
        return self.nx1 * self.nx2 * self.ny


def assert_distribution(p: np.ndarray, atol: float = DIST_ATOL) -> None:
    p = np.asarray(p, dtype=float)
    if p.min() < -atol:
        raise ValueError("negative probability mass")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError("probabilities do not sum to one")


def marginal(p: np.ndarray, axes: Axes) -> np.ndarray:
    """Marginal of ``p`` onto the given (sorted) axes."""
    p = np.asarray(p, dtype=float)
    drop = tuple(a for a in range(p.ndim) if a not in axes)
    return p.sum(axis=drop) if drop else p.copy()


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats with 0 log 0 = 0."""
    q = np.asarray(p, dtype=float).ravel()
    q = q[q > 0.0]
    return float(-(q * np.log(q)).sum())


def kl_divergence(p: np.ndarray, r: np.ndarray) -> float:
    """Relative entropy D(p || r) in nats; +inf off the support of r."""
    p = np.asarray(p, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    mask = p > 0.0
    if np.any(r[mask] <= 0.0):
        return float("inf")
    return float((p[mask] * (np.log(p[mask]) - np.log(r[mask]))).sum())


def mutual_information(p: np.ndarray, left: Axes, right: Axes,
                       given: Axes = ()) -> float:
    """I(left; right | given) of a joint array, in nats.

    ``left``, ``right`` and ``given`` are disjoint tuples of axis indices.
    """
    lg = tuple(sorted(set(left) | set(given)))
    rg = tuple(sorted(set(right) | set(given)))
    both = tuple(sorted(set(left) | set(right) | set(given)))
    value = entropy(marginal(p, lg)) + entropy(marginal(p, rg)) \
        - entropy(marginal(p, both))
    if given:
        value -= entropy(marginal(p, tuple(sorted(given))))
    return value


def multi_information(p: np.ndarray) -> float:
    """D(p || product of its own single-axis marginals)."""
    value = -entropy(p)
    for axis in range(np.asarray(p).ndim):
        value += entropy(marginal(p, (axis,)))
    return value


def metric_expectation(p: np.ndarray, log_metric: np.ndarray) -> float:
    """E_p[log q] where log_metric may contain -inf off the metric support."""
    p = np.asarray(p, dtype=float)
    bad = (p > 0.0) & np.isneginf(log_metric)
    if np.any(bad):
        raise UnsupportedMass("distribution places mass where the metric is zero")
    mask = p > 0.0
    return float((p[mask] * log_metric[mask]).sum())


def closest_type(dist: np.ndarray, n: int) -> np.ndarray:
    """Integer count array c with sum n minimizing |c/n - dist| per cell.

    Largest-remainder rounding; ties go to the lowest flat index.  Every
    cell deviates from ``n * dist`` by strictly less than one count.
    """
    if n < 1:
        raise InfeasibleSupport("denominator must be positive")
    d = np.asarray(dist, dtype=float)
    assert_distribution(d)
    flat = np.clip(d.ravel(), 0.0, None)
    scaled = flat * n
    base = np.floor(scaled).astype(np.int64)
    residual = n - int(base.sum())
    if residual < 0:  # pragma: no cover - guarded by assert_distribution
        raise InfeasibleSupport("rounding produced too much mass")
    frac = scaled - base
    order = np.argsort(-frac, kind="stable")
    base[order[:residual]] += 1
    return base.reshape(d.shape)


@dataclass(frozen=True)
class JointType:
    """An empirical distribution with denominator ``n``."""

    counts: tuple
    n: int

    @staticmethod
    def from_counts(counts: np.ndarray, n: Optional[int] = None) -> "JointType":
        c = np.asarray(counts, dtype=np.int64)
        total = int(c.sum())
        if n is None:
            n = total
        if total != n or c.min() < 0:
            raise ValueError("counts must be nonnegative and sum to n")
        return JointType(_freeze(c), n)

    @property
    def counts_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def dist(self) -> np.ndarray:
        return self.counts_array / float(self.n)


def _freeze(c: np.ndarray):
    if c.ndim == 1:
        return tuple(int(v) for v in c)
    return tuple(_freeze(row) for row in c)


def _composition_count(total: int, cells: int) -> int:
    from math import comb
    return comb(total + cells - 1, cells - 1)


def enumerate_joint_types(shape: Sequence[int], n: int,
                          predicate: Optional[Callable[[np.ndarray], bool]] = None,
                          budget: int = 10**8) -> Iterator[np.ndarray]:
    """Yield every count array of the given shape summing to n.

    Raises BudgetExceeded when the total number of compositions exceeds
    ``budget``.  Yields fresh integer arrays in lexicographic cell order.
    """
    shape = tuple(int(s) for s in shape)
    ncells = int(np.prod(shape))
    if _composition_count(n, ncells) > budget:
        raise BudgetExceeded("type enumeration beyond budget")
    counts = np.zeros(ncells, dtype=np.int64)

    def rec(i: int, remaining: int) -> Iterator[np.ndarray]:
        if i == ncells - 1:
            counts[i] = remaining
            c = counts.reshape(shape).copy()
            if predicate is None or predicate(c):
                yield c
            return
        for k in range(remaining + 1):
            counts[i] = k
            yield from rec(i + 1, remaining - k)

    yield from rec(0, n)


def enumerate_constrained_types(shape: Sequence[int], n: int,
                                group_constraints: Sequence[tuple[np.ndarray, np.ndarray]],
                                budget: int = 10**8) -> Iterator[np.ndarray]:
    """Yield count arrays satisfying exact group-sum constraints.

    Each constraint is a pair ``(labels, targets)`` where ``labels`` assigns
    every flat cell to a group and ``targets`` fixes each group's total.
    Used for marginal-matched enumeration: the labels of a marginal
    constraint are the flat indices of the kept axes.
    """
    shape = tuple(int(s) for s in shape)
    ncells = int(np.prod(shape))
    specs = []
    for labels, targets in group_constraints:
        labels = np.asarray(labels, dtype=np.int64).ravel()
        targets = np.asarray(targets, dtype=np.int64).ravel()
        if labels.size != ncells:
            raise ValueError("labels must cover every cell")
        if int(targets.sum()) != n:
            # inconsistent totals: nothing can match
            return
        remaining_cells = np.zeros(targets.size, dtype=np.int64)
        for g in labels:
            remaining_cells[g] += 1
        specs.append((labels, targets.copy(), remaining_cells.copy()))

    counts = np.zeros(ncells, dtype=np.int64)
    nodes = 0

    def rec(i: int, remaining: int) -> Iterator[np.ndarray]:
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded("constrained enumeration beyond budget")
        if i == ncells:
            if remaining == 0:
                yield counts.reshape(shape).copy()
            return
        kmax = remaining
        for labels, rem, cells_left in specs:
            kmax = min(kmax, rem[labels[i]])
        for k in range(kmax + 1):
            ok = True
            for labels, rem, cells_left in specs:
                g = labels[i]
                rem[g] -= k
                cells_left[g] -= 1
                if cells_left[g] == 0 and rem[g] != 0:
                    ok = False
            counts[i] = k
            if ok:
                yield from rec(i + 1, remaining - k)
            for labels, rem, cells_left in specs:
                g = labels[i]
                rem[g] += k
                cells_left[g] += 1
        counts[i] = 0

    if specs or n >= 0:
        yield from rec(0, n)


def marginal_labels(shape: Sequence[int], axes: Axes) -> np.ndarray:
    """Flat-cell group labels identifying the marginal over ``axes``."""
    shape = tuple(int(s) for s in shape)
    idx = np.indices(shape)
    kept = [idx[a] for a in sorted(axes)]
    sizes = [shape[a] for a in sorted(axes)]
    labels = np.zeros(shape, dtype=np.int64)
    for coord, size in zip(kept, sizes):
        labels = labels * size + coord
    return labels.ravel()
