import math

import numpy as np
import pytest

from mismac import SolverFailure, Tolerances, feasibility_check, marginal
from mismac import maximize_concave, minimize
from mismac.probability import metric_expectation
from mismac.programs import (LinearLowerBound, MarginalEquality,
                             MutualInfoTerm, Program, feasibility_residual,
                             objective_value)
from mismac.regions import f_inner_program, t2_program
from mismac.solver import pinned_target

TOL = Tolerances()


def pinned_mi_program(p, cut=None, sense="min"):
    cons = [MarginalEquality(0, (1,), marginal(p, (1,))),
            MarginalEquality(0, (0, 2), marginal(p, (0, 2)))]
    if cut is not None:
        cons.append(cut)
    return Program(shapes=(p.shape,), constraints=tuple(cons),
                   terms=(MutualInfoTerm(0, (1,), (0, 2)),), sense=sense)


def test_min_mi_without_cut_is_zero(std_spec):
    p = std_spec.p_joint
    report = minimize(pinned_mi_program(p))
    assert report.status == "converged"
    assert report.value == pytest.approx(0.0, abs=1e-6)
    product = marginal(p, (1,))[None, :, None] \
        * marginal(p, (0, 2))[:, None, :]
    np.testing.assert_allclose(report.argmin[0], product, atol=1e-5)


def test_metric_cut_only_raises_the_minimum(std_spec):
    p = std_spec.p_joint
    logq = std_spec.log_metric
    base = minimize(pinned_mi_program(p)).value
    cut = LinearLowerBound(0, logq, metric_expectation(p, logq))
    with_cut = minimize(pinned_mi_program(p, cut)).value
    assert with_cut >= base - TOL.opt_tol
    assert with_cut > 0.01  # the mismatched cut is active on this channel


def test_user2_bound_frozen_value(std_spec):
    report = minimize(t2_program(std_spec))
    assert report.status == "converged"
    assert report.value == pytest.approx(0.3723271661550276, abs=1e-6)
    assert report.feasibility_residual <= TOL.feas_tol
    assert report.kkt_residual <= TOL.opt_tol


def test_argmin_reproduces_reported_value(std_spec):
    prog = t2_program(std_spec)
    report = minimize(prog)
    exact = objective_value(prog, report.argmin)
    assert exact == pytest.approx(report.value, abs=1e-6)
    assert feasibility_residual(prog, report.argmin) <= 1e-6


def test_metric_scale_invariance(std_spec):
    # the metric cut compares expectations of log q, so c * q ** s with
    # c, s > 0 defines the same feasible set
    base = minimize(t2_program(std_spec)).value
    scaled_spec = std_spec.with_metric(3.7 * std_spec.metric ** 2.0)
    scaled = minimize(t2_program(scaled_spec)).value
    assert scaled == pytest.approx(base, abs=1e-6)


def test_repeat_solves_are_deterministic(std_spec):
    prog = t2_program(std_spec)
    a = minimize(prog)
    b = minimize(prog)
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmin[0], b.argmin[0])


def test_infeasible_min_program_reports_plus_inf(std_spec):
    p = std_spec.p_joint
    cut = LinearLowerBound(0, std_spec.log_metric, 10.0)  # log q <= 0 here
    report = minimize(pinned_mi_program(p, cut))
    assert report.status == "infeasible"
    assert report.value == math.inf
    assert report.argmin is None


def test_infeasible_max_program_reports_minus_inf(std_spec):
    p = std_spec.p_joint
    prog = f_inner_program(std_spec, p, r2=0.0)
    bad = Program(shapes=prog.shapes,
                  constraints=prog.constraints
                  + (LinearLowerBound(0, std_spec.log_metric, 10.0),),
                  terms=prog.terms, sense="max")
    report = maximize_concave(bad)
    assert report.status == "infeasible"
    assert report.value == -math.inf


def test_concave_maximization_beats_nominal_point(std_spec):
    p = std_spec.p_joint
    prog = f_inner_program(std_spec, p, r2=0.2)
    report = maximize_concave(prog)
    assert report.status == "converged"
    nominal = objective_value(prog, [p])
    assert report.value >= nominal - TOL.opt_tol


def test_feasibility_check_returns_witness(std_spec):
    prog = t2_program(std_spec)
    result = feasibility_check(prog.constraints, prog.shapes)
    assert result.feasible
    assert result.witness is not None
    assert result.witness.sum() == pytest.approx(1.0, abs=1e-6)


def test_feasibility_check_detects_empty_set(std_spec):
    prog = t2_program(std_spec)
    cons = prog.constraints + (LinearLowerBound(0, std_spec.log_metric, 10.0),)
    result = feasibility_check(cons, prog.shapes)
    assert not result.feasible
    assert result.witness is None


def test_pinned_target_requires_superset_marginal(std_spec):
    prog = t2_program(std_spec)
    target = pinned_target(prog, 0, (1,))
    np.testing.assert_allclose(target, marginal(std_spec.p_joint, (1,)))
    with pytest.raises(SolverFailure):
        pinned_target(prog, 0, (0, 1))
