"""Achievable-rate-region computations for both decoders and both MACs.

For the two-step (successive) decoder the user-1 bound is the minimum of a
small family of convex programs obtained by splitting the positive-part
objective; the max-metric regions use the classical single-shot conditions
with the sum-rate cut resolved by monotone bisection over R1.  All program
builders take an explicit joint distribution ``p`` so the exponent module
can re-evaluate the bounds away from the nominal input-times-channel law.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channel import ChannelSpec
from .errors import SolverFailure
from .probability import marginal, metric_expectation
from .programs import (ConstantTerm, LinearLowerBound, LinearTerm,
                       MarginalEquality, MarginalLink, MetricGapLowerBound,
                       MultiInformationTerm, MutualInfoTerm,
                       MutualInfoUpperBound, Program, RatePenaltyTerm)
from .solver import SolveReport, Tolerances, maximize_concave, minimize

BISECT_TOL = 1e-7


# ---------------------------------------------------------------------------
# program builders, standard MAC

def t2_program(spec: ChannelSpec, p: Optional[np.ndarray] = None) -> Program:
    """User-2 bound: min I(X2; X1, Y) over metric-improving couplings."""
    p = spec.p_joint if p is None else p
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (1,), marginal(p, (1,))),
            MarginalEquality(0, (0, 2), marginal(p, (0, 2))),
            LinearLowerBound(0, logq, metric_expectation(p, logq)),
        ),
        terms=(MutualInfoTerm(0, (1,), (0, 2)),),
        sense="min")


def f_inner_program(spec: ChannelSpec, p: np.ndarray, r2: float) -> Program:
    """Inner maximization of the step-1 score floor at rate r2."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (1,), marginal(p, (1,))),
            MarginalEquality(0, (0, 2), marginal(p, (0, 2))),
            MutualInfoUpperBound(0, (1,), (0, 2), (), r2),
        ),
        terms=(LinearTerm(0, logq),
               MutualInfoTerm(0, (1,), (0, 2), (), weight=-1.0),
               ConstantTerm(r2)),
        sense="max")


def metric_only_program(spec: ChannelSpec, p: np.ndarray,
                        f_lower: float) -> Program:
    """User-1 condition with a plain metric cut at the score floor."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0,), marginal(p, (0,))),
            MarginalEquality(0, (1, 2), marginal(p, (1, 2))),
            LinearLowerBound(0, logq, f_lower),
        ),
        terms=(MutualInfoTerm(0, (0,), (1, 2)),),
        sense="min")


def companion_cut_program(spec: ChannelSpec, p: np.ndarray, r2: float,
                          f_lower: float) -> Program:
    """User-1 condition with a rate-limited companion coupling cut."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape, shape),
        constraints=(
            MarginalEquality(0, (0,), marginal(p, (0,))),
            MarginalEquality(0, (1, 2), marginal(p, (1, 2))),
            MarginalEquality(1, (1,), marginal(p, (1,))),
            MarginalLink(0, 1, (0, 2)),
            MutualInfoUpperBound(1, (1,), (0, 2), (), r2),
            MetricGapLowerBound(1, logq, (1,), (0, 2), (), f_lower - r2),
        ),
        terms=(MutualInfoTerm(0, (0,), (1, 2)),),
        sense="min")


def companion_penalty_program(spec: ChannelSpec, p: np.ndarray, r2: float,
                              f_lower: float) -> Program:
    """User-1 condition where the companion rate excess is penalized."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape, shape),
        constraints=(
            MarginalEquality(0, (0,), marginal(p, (0,))),
            MarginalEquality(0, (1, 2), marginal(p, (1, 2))),
            MarginalEquality(1, (1,), marginal(p, (1,))),
            MarginalLink(0, 1, (0, 2)),
            LinearLowerBound(1, logq, f_lower),
        ),
        terms=(MutualInfoTerm(0, (0,), (1, 2)),
               RatePenaltyTerm(1, (1,), (0, 2), (), r2)),
        sense="min")


def maxmetric_r1_program(spec: ChannelSpec,
                         p: Optional[np.ndarray] = None) -> Program:
    """Single-shot user-1 cut for the max-metric decoder."""
    p = spec.p_joint if p is None else p
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0,), marginal(p, (0,))),
            MarginalEquality(0, (1, 2), marginal(p, (1, 2))),
            LinearLowerBound(0, logq, metric_expectation(p, logq)),
        ),
        terms=(MutualInfoTerm(0, (0,), (1, 2)),),
        sense="min")


def maxmetric_sum_program(spec: ChannelSpec, p: np.ndarray, r1: float,
                          r2: float) -> Program:
    """Single-shot sum-rate cut with per-user information clamps."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0,), marginal(p, (0,))),
            MarginalEquality(0, (1,), marginal(p, (1,))),
            MarginalEquality(0, (2,), marginal(p, (2,))),
            LinearLowerBound(0, logq, metric_expectation(p, logq)),
            MutualInfoUpperBound(0, (0,), (2,), (), r1),
            MutualInfoUpperBound(0, (1,), (2,), (), r2),
        ),
        terms=(MultiInformationTerm(0),),
        sense="min")


# ---------------------------------------------------------------------------
# program builders, cognitive MAC

def t2_cognitive_program(spec: ChannelSpec,
                         p: Optional[np.ndarray] = None) -> Program:
    p = spec.p_joint if p is None else p
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0, 1), marginal(p, (0, 1))),
            MarginalEquality(0, (0, 2), marginal(p, (0, 2))),
            LinearLowerBound(0, logq, metric_expectation(p, logq)),
        ),
        terms=(MutualInfoTerm(0, (1,), (2,), (0,)),),
        sense="min")


def f_inner_cognitive_program(spec: ChannelSpec, p: np.ndarray,
                              r2: float) -> Program:
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0, 1), marginal(p, (0, 1))),
            MarginalEquality(0, (0, 2), marginal(p, (0, 2))),
            MutualInfoUpperBound(0, (1,), (2,), (0,), r2),
        ),
        terms=(LinearTerm(0, logq),
               MutualInfoTerm(0, (1,), (2,), (0,), weight=-1.0),
               ConstantTerm(r2)),
        sense="max")


def direct_cognitive_program(spec: ChannelSpec, p: np.ndarray, r2: float,
                             f_lower: float) -> Program:
    """Cognitive user-1 condition with a rate-limited satellite cut."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0, 1), marginal(p, (0, 1))),
            MarginalEquality(0, (2,), marginal(p, (2,))),
            MutualInfoUpperBound(0, (1,), (2,), (0,), r2),
            MetricGapLowerBound(0, logq, (1,), (2,), (0,), f_lower - r2),
        ),
        terms=(MutualInfoTerm(0, (0,), (2,)),),
        sense="min")


def penalty_cognitive_program(spec: ChannelSpec, p: np.ndarray, r2: float,
                              f_lower: float) -> Program:
    """Cognitive user-1 condition with penalized satellite rate excess."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0, 1), marginal(p, (0, 1))),
            MarginalEquality(0, (2,), marginal(p, (2,))),
            LinearLowerBound(0, logq, f_lower),
        ),
        terms=(MutualInfoTerm(0, (0,), (2,)),
               RatePenaltyTerm(0, (1,), (2,), (0,), r2)),
        sense="min")


def maxmetric_sum_cognitive_program(spec: ChannelSpec, p: np.ndarray,
                                    r1: float) -> Program:
    """Cognitive sum-rate cut with the user-1 information clamp."""
    logq = spec.log_metric
    shape = spec.alphabets.shape
    return Program(
        shapes=(shape,),
        constraints=(
            MarginalEquality(0, (0, 1), marginal(p, (0, 1))),
            MarginalEquality(0, (2,), marginal(p, (2,))),
            LinearLowerBound(0, logq, metric_expectation(p, logq)),
            MutualInfoUpperBound(0, (0,), (2,), (), r1),
        ),
        terms=(MutualInfoTerm(0, (0, 1), (2,)),),
        sense="min")


# ---------------------------------------------------------------------------
# F-floor and per-point bounds

@dataclass(frozen=True)
class FValues:
    f_under: float
    components: tuple  # (nominal metric mean, inner maximum)
    witness: Optional[tuple]
    report: SolveReport


def f_under(spec: ChannelSpec, p: Optional[np.ndarray], r2: float,
            tolerances: Tolerances = Tolerances()) -> FValues:
    """Score floor used by every successive-decoder user-1 condition."""
    p = spec.p_joint if p is None else p
    base = metric_expectation(p, spec.log_metric)
    if spec.mac_kind == "cognitive":
        prog = f_inner_cognitive_program(spec, p, r2)
    else:
        prog = f_inner_program(spec, p, r2)
    report = maximize_concave(prog, tolerances)
    if report.status == "infeasible":
        raise SolverFailure("score-floor inner maximization infeasible")
    return FValues(f_under=max(base, report.value),
                   components=(base, report.value),
                   witness=report.argmin, report=report)


def r2_bound(spec: ChannelSpec, p: Optional[np.ndarray] = None,
             tolerances: Tolerances = Tolerances()) -> tuple[float, SolveReport]:
    """User-2 rate bound (same for both decoders on a given MAC kind)."""
    if spec.mac_kind == "cognitive":
        prog = t2_cognitive_program(spec, p)
    else:
        prog = t2_program(spec, p)
    report = minimize(prog, tolerances)
    return report.value, report


def r1_bound_successive(spec: ChannelSpec, r2: float,
                        p: Optional[np.ndarray] = None,
                        tolerances: Tolerances = Tolerances()):
    """Two-step-decoder user-1 bound: min over the split convex conditions.

    Returns (value, binding condition name, dict of SolveReports including
    the score-floor report).
    """
    p = spec.p_joint if p is None else p
    fv = f_under(spec, p, r2, tolerances)
    fl = fv.f_under
    if spec.mac_kind == "cognitive":
        progs = {
            "direct-cut": direct_cognitive_program(spec, p, r2, fl),
            "rate-penalty": penalty_cognitive_program(spec, p, r2, fl),
        }
    else:
        progs = {
            "metric-only": metric_only_program(spec, p, fl),
            "companion-cut": companion_cut_program(spec, p, r2, fl),
            "companion-penalty": companion_penalty_program(spec, p, r2, fl),
        }
    reports = {"score-floor": fv.report}
    best = float("inf")
    binding = "none"
    for name, prog in progs.items():
        rep = minimize(prog, tolerances)
        reports[name] = rep
        if rep.value < best:
            best, binding = rep.value, name
    return max(0.0, best), binding, reports


def r1_bound_maxmetric(spec: ChannelSpec, r2: float,
                       p: Optional[np.ndarray] = None,
                       tolerances: Tolerances = Tolerances()):
    """Max-metric-decoder user-1 bound at the given r2, by bisection."""
    p = spec.p_joint if p is None else p
    reports = {}
    if spec.mac_kind == "cognitive":
        # releasing the user-1 clamp caps r1 by the sum objective minus r2
        cap_rep = minimize(maxmetric_sum_cognitive_program(spec, p, r1=1e6),
                           tolerances)
        cap = max(0.0, cap_rep.value - r2)
        reports["sum-cap"] = cap_rep

        def ok(r1: float) -> bool:
            rep = minimize(maxmetric_sum_cognitive_program(spec, p, r1),
                           tolerances)
            return r1 + r2 <= rep.value + tolerances.opt_tol
    else:
        cap_rep = minimize(maxmetric_r1_program(spec, p), tolerances)
        cap = cap_rep.value
        reports["user1-cut"] = cap_rep

        def ok(r1: float) -> bool:
            rep = minimize(maxmetric_sum_program(spec, p, r1, r2), tolerances)
            return r1 + r2 <= rep.value + tolerances.opt_tol

    if cap <= 0.0:
        return 0.0, "user1-cut", reports
    if ok(cap):
        return cap, "user1-cut", reports
    lo, hi = 0.0, cap
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, "sum-cut", reports


# ---------------------------------------------------------------------------
# curve tracing

@dataclass(frozen=True)
class RegionPoint:
    r2: float
    r1_max: float
    binding: str
    certificates: tuple


@dataclass
class RateRegionCurve:
    decoder_kind: str
    mac_kind: str
    points: list

    @property
    def r2s(self) -> np.ndarray:
        return np.array([pt.r2 for pt in self.points])

    @property
    def r1s(self) -> np.ndarray:
        return np.array([pt.r1_max for pt in self.points])

    def r1_at(self, r2: float) -> float:
        """Piecewise-linear interpolation of the traced boundary."""
        return float(np.interp(r2, self.r2s, self.r1s))

    def max_sum_rate(self) -> float:
        return float(np.max(self.r2s + self.r1s))


@dataclass(frozen=True)
class RegionQuery:
    spec: ChannelSpec
    decoder_kind: str  # successive | max-metric | matched-ml
    r2_grid: tuple
    convex_hull: bool = False
    tolerances: Tolerances = Tolerances()


def _clip_grid(r2_grid, r2_cap: float) -> list:
    grid = sorted(float(r) for r in r2_grid)
    if grid and grid[0] < 0:
        raise ValueError("r2 grid must be nonnegative")
    clipped = [r for r in grid if r <= r2_cap + 1e-12]
    if not clipped or r2_cap - clipped[-1] > 1e-9:
        clipped.append(r2_cap)
    return clipped


def trace_region(query: RegionQuery) -> RateRegionCurve:
    spec = query.spec
    decoder = query.decoder_kind
    if decoder not in ("successive", "max-metric", "matched-ml"):
        raise ValueError(f"unknown decoder kind {decoder!r}")
    if decoder == "matched-ml":
        spec = spec.matched()
    tol = query.tolerances
    cap, cap_rep = r2_bound(spec, tolerances=tol)
    grid = _clip_grid(query.r2_grid, cap)
    if decoder == "successive":
        bound = lambda r2: r1_bound_successive(spec, r2, tolerances=tol)
    else:
        bound = lambda r2: r1_bound_maxmetric(spec, r2, tolerances=tol)
    points = []
    for r2 in grid:
        value, binding, reports = bound(r2)
        points.append(RegionPoint(r2=r2, r1_max=value, binding=binding,
                                  certificates=tuple(reports.values())))
    curve = RateRegionCurve(decoder_kind=query.decoder_kind,
                            mac_kind=spec.mac_kind, points=points)
    if query.convex_hull:
        curve = concave_envelope(curve)
    return curve


def concave_envelope(curve: RateRegionCurve) -> RateRegionCurve:
    """Upper concave envelope of the traced points (time sharing)."""
    pts = sorted(curve.points, key=lambda pt: pt.r2)
    hull: list = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = (hull[-2].r2, hull[-2].r1_max), \
                (hull[-1].r2, hull[-1].r1_max)
            if (y2 - y1) * (pt.r2 - x1) <= (pt.r1_max - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    xs = [pt.r2 for pt in hull]
    ys = [pt.r1_max for pt in hull]
    points = [RegionPoint(r2=pt.r2,
                          r1_max=float(np.interp(pt.r2, xs, ys)),
                          binding=pt.binding, certificates=pt.certificates)
              for pt in pts]
    return RateRegionCurve(decoder_kind=curve.decoder_kind,
                           mac_kind=curve.mac_kind, points=points)
