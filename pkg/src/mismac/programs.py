"""Declarative model of the convex programs over joint distributions.

A :class:`Program` lists one or more distribution blocks (each a point on a
cell simplex), constraints tying them to fixed marginals, linear-expectation
cuts and mutual-information cuts, and an objective built from information
functionals.  The model carries exact semantics (used by the brute-force
grid oracle and for feasibility residuals) while the solver module owns the
convex reformulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .probability import (Axes, marginal, metric_expectation,
                          multi_information, mutual_information)


@dataclass(frozen=True)
class MarginalEquality:
    """marginal(block, axes) == target (a fixed distribution)."""

    block: int
    axes: Axes
    target: np.ndarray


@dataclass(frozen=True)
class MarginalLink:
    """marginal(block_a, axes) == marginal(block_b, axes)."""

    block_a: int
    block_b: int
    axes: Axes


@dataclass(frozen=True)
class LinearLowerBound:
    """sum(coeffs * p) >= lower; coeffs may contain -inf (forces p = 0)."""

    block: int
    coeffs: np.ndarray
    lower: float


@dataclass(frozen=True)
class MutualInfoUpperBound:
    """I(left; right | given) evaluated on the block, <= upper."""

    block: int
    left: Axes
    right: Axes
    given: Axes
    upper: float


@dataclass(frozen=True)
class MetricGapLowerBound:
    """sum(coeffs * p) - I(left; right | given) >= lower."""

    block: int
    coeffs: np.ndarray
    left: Axes
    right: Axes
    given: Axes
    lower: float


@dataclass(frozen=True)
class MutualInfoTerm:
    block: int
    left: Axes
    right: Axes
    given: Axes = ()
    weight: float = 1.0


@dataclass(frozen=True)
class MultiInformationTerm:
    """D(p || product of its own single-axis marginals)."""

    block: int
    weight: float = 1.0


@dataclass(frozen=True)
class LinearTerm:
    block: int
    coeffs: np.ndarray
    weight: float = 1.0


@dataclass(frozen=True)
class RatePenaltyTerm:
    """max(0, I(left; right | given) - rate)."""

    block: int
    left: Axes
    right: Axes
    given: Axes
    rate: float


@dataclass(frozen=True)
class ConstantTerm:
    value: float


Constraint = Union[MarginalEquality, MarginalLink, LinearLowerBound,
                   MutualInfoUpperBound, MetricGapLowerBound]
Term = Union[MutualInfoTerm, MultiInformationTerm, LinearTerm,
             RatePenaltyTerm, ConstantTerm]


@dataclass(frozen=True)
class Program:
    """A (jointly convex for sense='min') program over distribution blocks."""

    shapes: tuple
    constraints: tuple
    terms: tuple
    sense: str = "min"

    def __post_init__(self) -> None:
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def nblocks(self) -> int:
        return len(self.shapes)


def _safe_dot(coeffs: np.ndarray, p: np.ndarray) -> float:
    try:
        return metric_expectation(p, np.asarray(coeffs, dtype=float))
    except Exception:
        return float("-inf")


def constraint_violation(con: Constraint, blocks: Sequence[np.ndarray]) -> float:
    """Nonnegative violation of a single constraint at the given blocks."""
    if isinstance(con, MarginalEquality):
        m = marginal(blocks[con.block], con.axes)
        return float(np.max(np.abs(m - np.asarray(con.target, dtype=float))))
    if isinstance(con, MarginalLink):
        ma = marginal(blocks[con.block_a], con.axes)
        mb = marginal(blocks[con.block_b], con.axes)
        return float(np.max(np.abs(ma - mb)))
    if isinstance(con, LinearLowerBound):
        return max(0.0, con.lower - _safe_dot(con.coeffs, blocks[con.block]))
    if isinstance(con, MutualInfoUpperBound):
        value = mutual_information(blocks[con.block], con.left, con.right, con.given)
        return max(0.0, value - con.upper)
    if isinstance(con, MetricGapLowerBound):
        gap = _safe_dot(con.coeffs, blocks[con.block]) \
            - mutual_information(blocks[con.block], con.left, con.right, con.given)
        return max(0.0, con.lower - gap)
    raise TypeError(f"unknown constraint {type(con)!r}")


def feasibility_residual(program: Program, blocks: Sequence[np.ndarray]) -> float:
    """Sup-norm violation across all constraints plus simplex residuals."""
    res = 0.0
    for p in blocks:
        res = max(res, float(max(0.0, -np.min(p))), abs(float(np.sum(p)) - 1.0))
    for con in program.constraints:
        res = max(res, constraint_violation(con, blocks))
    return res


def objective_value(program: Program, blocks: Sequence[np.ndarray]) -> float:
    """Exact objective value of the program at the given blocks."""
    total = 0.0
    for term in program.terms:
        if isinstance(term, MutualInfoTerm):
            total += term.weight * mutual_information(
                blocks[term.block], term.left, term.right, term.given)
        elif isinstance(term, MultiInformationTerm):
            total += term.weight * multi_information(blocks[term.block])
        elif isinstance(term, LinearTerm):
            total += term.weight * _safe_dot(term.coeffs, blocks[term.block])
        elif isinstance(term, RatePenaltyTerm):
            value = mutual_information(blocks[term.block], term.left,
                                       term.right, term.given)
            total += max(0.0, value - term.rate)
        elif isinstance(term, ConstantTerm):
            total += term.value
        else:
            raise TypeError(f"unknown objective term {type(term)!r}")
    return total
