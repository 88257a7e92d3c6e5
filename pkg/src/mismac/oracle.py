"""Exhaustive type-grid reference optimizer.

Evaluates the same declarative programs as the convex solver, but by
enumerating every denominator-d joint type whose marginals match the
closest-type quantization of the program's marginal targets.  Inequality
constraints and objectives are evaluated exactly on each candidate, so the
result is an independent bracket on the solver value with resolution set
by the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyFeasibleSet
from .probability import (JointType, closest_type, enumerate_constrained_types,
                          marginal_labels)
from .programs import (ConstantTerm, MarginalEquality, MarginalLink, Program,
                       constraint_violation, objective_value)

INEQ_SLACK = 1e-12  # float roundoff only; constraints are otherwise exact


@dataclass(frozen=True)
class OracleResult:
    value: float
    arg_type: tuple
    grid_denominator: int
    evaluated_count: int


def grid_epsilon(d: int, scale: float = 0.5) -> float:
    """Grid-resolution bracket width for denominator d."""
    return scale * np.log(d) / d


def _block_candidates(program: Program, block: int, d: int, budget: int,
                      extra: Optional[tuple] = None):
    """Enumerate denominator-d types matching the block's pinned marginals."""
    shape = tuple(program.shapes[block])
    groups = []
    for con in program.constraints:
        if isinstance(con, MarginalEquality) and con.block == block:
            target_counts = closest_type(np.asarray(con.target, float), d)
            groups.append((marginal_labels(shape, con.axes),
                           target_counts.ravel()))
    if extra is not None:
        groups.append(extra)
    return enumerate_constrained_types(shape, d, groups, budget=budget)


def _split_by_block(program: Program):
    cons = {b: [] for b in range(program.nblocks)}
    links = []
    for con in program.constraints:
        if isinstance(con, MarginalLink):
            links.append(con)
        elif isinstance(con, MarginalEquality):
            continue  # handled by the enumeration itself
        else:
            cons[con.block].append(con)
    terms = {b: [] for b in range(program.nblocks)}
    const = 0.0
    for term in program.terms:
        if isinstance(term, ConstantTerm):
            const += term.value
        else:
            terms[term.block].append(term)
    return cons, terms, links, const


def _grid_extremize(program: Program, d: int, budget: int) -> OracleResult:
    sense = program.sense
    sign = 1.0 if sense == "min" else -1.0
    cons, terms, links, const = _split_by_block(program)
    evaluated = 0

    if program.nblocks == 1:
        best = None
        best_counts = None
        for counts in _block_candidates(program, 0, d, budget):
            evaluated += 1
            dist = counts / float(d)
            if any(constraint_violation(c, [dist]) > INEQ_SLACK for c in cons[0]):
                continue
            value = objective_value(Program(program.shapes, (), tuple(terms[0]),
                                            sense), [dist])
            if best is None or sign * value < sign * best:
                best, best_counts = value, counts
        if best is None:
            raise EmptyFeasibleSet("no grid type satisfies the constraints")
        return OracleResult(best + const,
                            (JointType.from_counts(best_counts, d),),
                            d, evaluated)

    if program.nblocks != 2 or len(links) != 1:
        raise ValueError("oracle supports one or two linked blocks")
    link = links[0]
    b0, b1 = link.block_a, link.block_b
    labels0 = marginal_labels(tuple(program.shapes[b0]), link.axes)
    labels1 = marginal_labels(tuple(program.shapes[b1]), link.axes)
    nlab = int(labels0.max()) + 1

    # group primary-block candidates by the linked marginal counts
    groups: dict = {}
    for counts in _block_candidates(program, b0, d, budget):
        evaluated += 1
        dist = counts / float(d)
        if any(constraint_violation(c, _pad(dist, c.block)) > INEQ_SLACK
               for c in cons[b0]):
            continue
        value = objective_value(Program(program.shapes, (),
                                        tuple(terms[b0]), sense), _pad(dist, b0))
        key = tuple(np.bincount(labels0, weights=counts.ravel(),
                                minlength=nlab).astype(np.int64))
        cur = groups.get(key)
        if cur is None or sign * value < sign * cur[0]:
            groups[key] = (value, counts)

    best = None
    best_args = None
    for key, (v0, c0) in sorted(groups.items()):
        extra = (labels1, np.asarray(key, dtype=np.int64))
        inner = None
        inner_counts = None
        for counts in _block_candidates(program, b1, d, budget, extra=extra):
            evaluated += 1
            dist = counts / float(d)
            if any(constraint_violation(c, _pad(dist, b1)) > INEQ_SLACK
                   for c in cons[b1]):
                continue
            value = objective_value(Program(program.shapes, (),
                                            tuple(terms[b1]), sense),
                                    _pad(dist, b1))
            if inner is None or sign * value < sign * inner:
                inner, inner_counts = value, counts
        if inner is None:
            continue
        total = v0 + inner
        if best is None or sign * total < sign * best:
            best = total
            best_args = (c0, inner_counts)
    if best is None:
        raise EmptyFeasibleSet("no grid type pair satisfies the constraints")
    args = tuple(JointType.from_counts(c, d) for c in best_args)
    return OracleResult(best + const, args, d, evaluated)


def _pad(dist: np.ndarray, block: int) -> list:
    """Place dist at the given block index of an evaluation list."""
    return [dist] * (block + 1)


def grid_minimize(program: Program, d: int, budget: int = 10**8) -> OracleResult:
    if program.sense != "min":
        raise ValueError("grid_minimize expects a min-sense program")
    return _grid_extremize(program, d, budget)


def grid_maximize(program: Program, d: int, budget: int = 10**8) -> OracleResult:
    if program.sense != "max":
        raise ValueError("grid_maximize expects a max-sense program")
    return _grid_extremize(program, d, budget)
