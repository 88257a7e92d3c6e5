"""Convex solves over distribution blocks via conic reformulation.

Every program assembled by the region and exponent modules reduces to
entropies, relative entropies with an affine reference, linear terms and
positive parts, so each one compiles to a disciplined convex problem.
Compiled problems are cached by structure with numeric data bound to
parameters, which makes the many thousands of small solves behind a region
sweep or an exponent grid cheap.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import cvxpy as cp
import numpy as np

from .errors import SolverFailure
from .probability import Axes, entropy, marginal
from .programs import (ConstantTerm, LinearLowerBound, LinearTerm,
                       MarginalEquality, MarginalLink, MetricGapLowerBound,
                       MultiInformationTerm, MutualInfoTerm,
                       MutualInfoUpperBound, Program, RatePenaltyTerm,
                       feasibility_residual, objective_value)


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6


@dataclass
class SolveReport:
    value: float
    argmin: Optional[tuple]
    kkt_residual: float
    feasibility_residual: float
    status: str  # converged | max-iterations | infeasible

    def summary(self) -> str:
        return (f"value={self.value:.9g} status={self.status} "
                f"feas={self.feasibility_residual:.2e} kkt={self.kkt_residual:.2e}")


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: Optional[np.ndarray]


def _marg_matrix(shape: tuple, axes: Axes) -> np.ndarray:
    """0/1 matrix mapping a flat cell vector to its marginal over axes."""
    axes = tuple(sorted(axes))
    ncells = int(np.prod(shape))
    labels = np.zeros(shape, dtype=np.int64)
    idx = np.indices(shape)
    for a in axes:
        labels = labels * shape[a] + idx[a]
    labels = labels.ravel()
    nout = int(np.prod([shape[a] for a in axes]))
    m = np.zeros((nout, ncells))
    m[labels, np.arange(ncells)] = 1.0
    return m


def pinned_target(program: Program, block: int, axes: Axes) -> np.ndarray:
    """Marginal target implied by the program's equality constraints."""
    axes = tuple(sorted(axes))
    for con in program.constraints:
        if isinstance(con, MarginalEquality) and con.block == block:
            pinned = tuple(sorted(con.axes))
            if set(axes) <= set(pinned):
                target = np.asarray(con.target, dtype=float)
                keep = tuple(i for i, a in enumerate(pinned) if a in axes)
                drop = tuple(i for i in range(target.ndim) if i not in keep)
                return target.sum(axis=drop) if drop else target
    raise SolverFailure(f"no pinned marginal over axes {axes} for block {block}")


def _neginf_mask(coeffs: np.ndarray) -> tuple:
    return tuple(bool(b) for b in np.isneginf(np.asarray(coeffs, float)).ravel())


def _signature(program: Program) -> tuple:
    sig = [program.sense, tuple(program.shapes)]
    for con in program.constraints:
        if isinstance(con, MarginalEquality):
            sig.append(("margeq", con.block, tuple(con.axes)))
        elif isinstance(con, MarginalLink):
            sig.append(("link", con.block_a, con.block_b, tuple(con.axes)))
        elif isinstance(con, LinearLowerBound):
            sig.append(("linlo", con.block, _neginf_mask(con.coeffs)))
        elif isinstance(con, MutualInfoUpperBound):
            sig.append(("miub", con.block, con.left, con.right, con.given))
        elif isinstance(con, MetricGapLowerBound):
            sig.append(("gaplo", con.block, con.left, con.right, con.given,
                        _neginf_mask(con.coeffs)))
        else:
            raise TypeError(type(con))
    for term in program.terms:
        if isinstance(term, MutualInfoTerm):
            sig.append(("mi", term.block, term.left, term.right, term.given,
                        np.sign(term.weight)))
        elif isinstance(term, MultiInformationTerm):
            sig.append(("multi", term.block, np.sign(term.weight)))
        elif isinstance(term, LinearTerm):
            sig.append(("lin", term.block, _neginf_mask(term.coeffs)))
        elif isinstance(term, RatePenaltyTerm):
            sig.append(("pen", term.block, term.left, term.right, term.given))
        elif isinstance(term, ConstantTerm):
            sig.append(("const",))
        else:
            raise TypeError(type(term))
    return tuple(sig)


class _MIExpression:
    """Convex expression for I(left; right | given) on one block variable.

    Produces either a relative-entropy form (reference = pinned factor times
    a variable marginal) or a negative-entropy form whose pinned-marginal
    entropies are returned through a per-solve constant.
    """

    def __init__(self, shape: tuple, v: cp.Variable, idx: int,
                 left: Axes, right: Axes, given: Axes):
        self.kind = (tuple(left), tuple(right), tuple(given))
        self.shape = shape
        self.idx = idx
        self.left, self.right, self.given = left, right, given
        all_axes = tuple(sorted(set(left) | set(right) | set(given)))
        if given == () and len(all_axes) == len(shape):
            # I(A;B) with A u B = all axes: rel_entr against pinned left factor
            self._mode = "rel"
            self._ref_axes = tuple(sorted(set(right) | set(given)))
            self._factor_axes = tuple(sorted(left))
        elif given and len(all_axes) == len(shape):
            # I(A;B|C): rel_entr against pinned A|C factor times the (A,C)u... marginal
            self._mode = "rel-cond"
            self._ref_axes = tuple(sorted(set(given) | set(right)))
            self._factor_axes = tuple(sorted(set(left) | set(given)))
        else:
            # strict sub-marginal, e.g. I(X1;Y): entropy of a variable marginal
            self._mode = "ent"
            self._sub_axes = tuple(sorted(set(left) | set(right)))
        ncells = int(np.prod(shape))
        if self._mode in ("rel", "rel-cond"):
            a = _marg_matrix(shape, self._ref_axes)
            self._broadcast = a.T @ a
            self._factor = cp.Parameter(ncells, nonneg=True)
            self.expr = cp.sum(cp.rel_entr(v, cp.multiply(self._factor,
                                                          self._broadcast @ v)))
        else:
            self._sub = _marg_matrix(shape, self._sub_axes)
            self.expr = cp.sum(-cp.entr(self._sub @ v))

    def update(self, program: Program) -> float:
        """Bind pinned data; return the additive constant of the MI value."""
        if self._mode == "rel":
            t = pinned_target(program, self.idx, self._factor_axes).ravel()
            self._factor.value = self._cellwise(t, self._factor_axes)
            return 0.0
        if self._mode == "rel-cond":
            tj = pinned_target(program, self.idx, self._factor_axes)
            tc = pinned_target(program, self.idx, tuple(sorted(self.given)))
            cond = np.zeros_like(tj)
            np.divide(tj, np.expand_dims(tc, axis=-1), out=cond, where=tj > 0)
            # conditional factor ordered over factor_axes; given axes precede
            # left axes there only when sorted order says so, which holds for
            # the cell lattice kinds used in this package
            return self._update_cond(cond)
        # entropy form: I = -H(sub) + H(left-part) + H(right-part)
        hl = entropy(pinned_target(program, self.idx, tuple(sorted(self.left))))
        hr = entropy(pinned_target(program, self.idx, tuple(sorted(self.right))))
        return hl + hr

    def _update_cond(self, cond: np.ndarray) -> float:
        self._factor.value = self._cellwise(cond.ravel(), self._factor_axes)
        return 0.0

    def _cellwise(self, flat_vals: np.ndarray, axes: Axes) -> np.ndarray:
        a = _marg_matrix(self.shape, axes)
        return a.T @ flat_vals


def _clean(p: np.ndarray, shape: tuple) -> np.ndarray:
    q = np.clip(np.asarray(p, float), 0.0, None)
    s = q.sum()
    if s <= 0:
        raise SolverFailure("degenerate solver output")
    return (q / s).reshape(shape)


class _Compiled:
    def __init__(self, program: Program):
        shapes = [tuple(s) for s in program.shapes]
        self.shapes = shapes
        self.vars = [cp.Variable(int(np.prod(s)), nonneg=True) for s in shapes]
        constraints = [cp.sum(v) == 1 for v in self.vars]
        self._updaters: list[Callable[[Program], None]] = []
        self._const_fns: list[Callable[[Program], float]] = []
        obj_terms = []

        def add_support_mask(v, coeffs):
            mask = np.isneginf(np.asarray(coeffs, float)).ravel()
            if mask.any():
                constraints.append(v[np.where(mask)[0]] == 0)
            safe = np.where(mask, 0.0, np.asarray(coeffs, float).ravel())
            return safe

        for ci, con in enumerate(program.constraints):
            if isinstance(con, MarginalEquality):
                m = _marg_matrix(shapes[con.block], con.axes)
                tgt = cp.Parameter(m.shape[0], nonneg=True)
                constraints.append(m @ self.vars[con.block] == tgt)
                self._updaters.append(
                    lambda prog, ci=ci, tgt=tgt: tgt.__setattr__(
                        "value", np.asarray(prog.constraints[ci].target, float).ravel()))
            elif isinstance(con, MarginalLink):
                ma = _marg_matrix(shapes[con.block_a], con.axes)
                mb = _marg_matrix(shapes[con.block_b], con.axes)
                constraints.append(ma @ self.vars[con.block_a]
                                   == mb @ self.vars[con.block_b])
            elif isinstance(con, LinearLowerBound):
                ncells = int(np.prod(shapes[con.block]))
                cvec = cp.Parameter(ncells)
                lo = cp.Parameter()
                _ = add_support_mask(self.vars[con.block], con.coeffs)
                constraints.append(cvec @ self.vars[con.block] >= lo)

                def upd(prog, ci=ci, cvec=cvec, lo=lo):
                    c = prog.constraints[ci]
                    cvec.value = np.where(np.isneginf(np.asarray(c.coeffs, float).ravel()),
                                          0.0, np.asarray(c.coeffs, float).ravel())
                    lo.value = float(c.lower)
                self._updaters.append(upd)
            elif isinstance(con, MutualInfoUpperBound):
                mi = _MIExpression(shapes[con.block], self.vars[con.block],
                                   con.block, con.left, con.right, con.given)
                ub = cp.Parameter()
                constraints.append(mi.expr <= ub)

                def upd(prog, ci=ci, mi=mi, ub=ub):
                    const = mi.update(prog)
                    ub.value = float(prog.constraints[ci].upper) - const
                self._updaters.append(upd)
            elif isinstance(con, MetricGapLowerBound):
                mi = _MIExpression(shapes[con.block], self.vars[con.block],
                                   con.block, con.left, con.right, con.given)
                ncells = int(np.prod(shapes[con.block]))
                cvec = cp.Parameter(ncells)
                rhs = cp.Parameter()
                _ = add_support_mask(self.vars[con.block], con.coeffs)
                constraints.append(mi.expr - cvec @ self.vars[con.block] <= rhs)

                def upd(prog, ci=ci, mi=mi, cvec=cvec, rhs=rhs):
                    c = prog.constraints[ci]
                    const = mi.update(prog)
                    cvec.value = np.where(np.isneginf(np.asarray(c.coeffs, float).ravel()),
                                          0.0, np.asarray(c.coeffs, float).ravel())
                    rhs.value = -float(c.lower) - const
                self._updaters.append(upd)
            else:
                raise TypeError(type(con))

        for ti, term in enumerate(program.terms):
            if isinstance(term, MutualInfoTerm):
                if term.weight not in (1.0, -1.0):
                    raise SolverFailure("mutual-information weights must be +-1")
                all_axes = set(term.left) | set(term.right) | set(term.given)
                shape = shapes[term.block]
                if len(all_axes) == len(shape):
                    # full-lattice MI against pinned marginals: -H(p) + consts
                    dcp = cp.sum(-cp.entr(self.vars[term.block]))

                    def cfn(prog, ti=ti):
                        t = prog.terms[ti]
                        if t.given:
                            hj = entropy(pinned_target(
                                prog, t.block, tuple(sorted(set(t.left) | set(t.given)))))
                            hr = entropy(pinned_target(
                                prog, t.block, tuple(sorted(set(t.right) | set(t.given)))))
                            hg = entropy(pinned_target(prog, t.block,
                                                       tuple(sorted(t.given))))
                            return t.weight * (hj + hr - hg)
                        hl = entropy(pinned_target(prog, t.block,
                                                   tuple(sorted(t.left))))
                        hr = entropy(pinned_target(prog, t.block,
                                                   tuple(sorted(t.right))))
                        return t.weight * (hl + hr)
                else:
                    sub = _marg_matrix(shape, tuple(sorted(all_axes)))
                    dcp = cp.sum(-cp.entr(sub @ self.vars[term.block]))

                    def cfn(prog, ti=ti):
                        t = prog.terms[ti]
                        hl = entropy(pinned_target(prog, t.block,
                                                   tuple(sorted(t.left))))
                        hr = entropy(pinned_target(prog, t.block,
                                                   tuple(sorted(t.right))))
                        return t.weight * (hl + hr)
                obj_terms.append(term.weight * dcp)
                self._const_fns.append(cfn)
            elif isinstance(term, MultiInformationTerm):
                if term.weight != 1.0:
                    raise SolverFailure("multi-information weight must be +1")
                obj_terms.append(cp.sum(-cp.entr(self.vars[term.block])))

                def cfn(prog, ti=ti):
                    t = prog.terms[ti]
                    shape = program.shapes[t.block]
                    return sum(entropy(pinned_target(prog, t.block, (a,)))
                               for a in range(len(shape)))
                self._const_fns.append(cfn)
            elif isinstance(term, LinearTerm):
                ncells = int(np.prod(shapes[term.block]))
                cvec = cp.Parameter(ncells)
                _ = add_support_mask(self.vars[term.block], term.coeffs)
                obj_terms.append(cvec @ self.vars[term.block])

                def upd(prog, ti=ti, cvec=cvec):
                    t = prog.terms[ti]
                    c = np.asarray(t.coeffs, float).ravel()
                    cvec.value = t.weight * np.where(np.isneginf(c), 0.0, c)
                self._updaters.append(upd)
            elif isinstance(term, RatePenaltyTerm):
                mi = _MIExpression(shapes[term.block], self.vars[term.block],
                                   term.block, term.left, term.right, term.given)
                rate = cp.Parameter()
                obj_terms.append(cp.pos(mi.expr - rate))

                def upd(prog, ti=ti, mi=mi, rate=rate):
                    const = mi.update(prog)
                    rate.value = float(prog.terms[ti].rate) - const
                self._updaters.append(upd)
            elif isinstance(term, ConstantTerm):
                self._const_fns.append(lambda prog, ti=ti: float(prog.terms[ti].value))
            else:
                raise TypeError(type(term))

        objective = obj_terms[0] if obj_terms else cp.Constant(0.0)
        for extra in obj_terms[1:]:
            objective = objective + extra
        if program.sense == "min":
            self.problem = cp.Problem(cp.Minimize(objective), constraints)
        else:
            self.problem = cp.Problem(cp.Maximize(objective), constraints)

    def bind(self, program: Program) -> float:
        for upd in self._updaters:
            upd(program)
        return float(sum(fn(program) for fn in self._const_fns))


_cache: dict = {}
_lock = threading.RLock()


def _solve(program: Program, tolerances: Tolerances) -> SolveReport:
    key = _signature(program)
    with _lock:
        comp = _cache.get(key)
        if comp is None:
            comp = _Compiled(program)
            _cache[key] = comp
        const = comp.bind(program)
        try:
            import warnings
            with warnings.catch_warnings():
                # inaccurate-solution warnings are handled via status checks
                warnings.simplefilter("ignore", UserWarning)
                comp.problem.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:
            raise SolverFailure(str(exc)) from exc
        status = comp.problem.status
        if status in (cp.INFEASIBLE, "infeasible_inaccurate"):
            bad = float("inf") if program.sense == "min" else float("-inf")
            return SolveReport(value=bad, argmin=None, kkt_residual=0.0,
                               feasibility_residual=0.0, status="infeasible")
        if status not in (cp.OPTIMAL, "optimal_inaccurate"):
            raise SolverFailure(f"solver returned status {status}")
        raw = comp.problem.value
        blocks = tuple(_clean(v.value, s)
                       for v, s in zip(comp.vars, comp.shapes))
    value = float(raw) + const
    exact = objective_value(program, blocks)
    feas = feasibility_residual(program, blocks)
    kkt = abs(exact - value)
    ok = feas <= tolerances.feas_tol and kkt <= tolerances.opt_tol
    return SolveReport(value=value, argmin=blocks, kkt_residual=kkt,
                       feasibility_residual=feas,
                       status="converged" if ok else "max-iterations")


def minimize(program: Program, tolerances: Tolerances = Tolerances()) -> SolveReport:
    if program.sense != "min":
        raise ValueError("minimize expects a min-sense program")
    return _solve(program, tolerances)


def maximize_concave(program: Program, tolerances: Tolerances = Tolerances()) -> SolveReport:
    if program.sense != "max":
        raise ValueError("maximize_concave expects a max-sense program")
    return _solve(program, tolerances)


def feasibility_check(constraints: tuple, shapes: tuple,
                      tolerances: Tolerances = Tolerances()) -> FeasibilityResult:
    program = Program(shapes=tuple(tuple(s) for s in shapes),
                      constraints=tuple(constraints),
                      terms=(ConstantTerm(0.0),), sense="min")
    report = _solve(program, tolerances)
    if report.status == "infeasible":
        return FeasibilityResult(False, None)
    if report.feasibility_residual > tolerances.feas_tol:
        return FeasibilityResult(False, None)
    return FeasibilityResult(True, report.argmin[0])
