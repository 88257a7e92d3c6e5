"""Command-line front end: region / exponent / simulate / validate."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import regions, simulate
from .channel import ChannelSpec, spec_from_config
from .errors import MismacError
from .exponents import (ExponentQuery, exponent_type1_cognitive,
                        exponent_type1_standard, exponent_type2_standard)
from .oracle import grid_epsilon, grid_maximize, grid_minimize
from .probability import marginal, metric_expectation
from .solver import Tolerances, maximize_concave, minimize

LN2 = math.log(2.0)


def thread_count() -> int:
    raw = os.environ.get("MMAC_THREADS", "")
    if raw.strip():
        value = int(raw)
        if value < 1:
            raise ValueError("MMAC_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, str) else _fmt(c)
                              for c in row) + "\n")


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _rate_scale(bits: bool) -> float:
    return LN2 if bits else 1.0


def _default_r2_grid(spec: ChannelSpec, step: float) -> np.ndarray:
    upper = math.log(spec.alphabets.nx2)
    return np.arange(0.0, upper + step, step)


def cmd_region(config: dict, out: Path, seed: int, bits: bool) -> int:
    spec = spec_from_config(config)
    section = config.get("region", {})
    step = float(section.get("r2_step", 0.005))
    decoders = section.get("decoders", ["successive", "max-metric"])
    hull = bool(section.get("convex_hull", False))
    scale = _rate_scale(bits)
    report_lines = []
    for decoder in decoders:
        query = regions.RegionQuery(spec=spec, decoder_kind=decoder,
                                    r2_grid=tuple(_default_r2_grid(spec, step)),
                                    convex_hull=hull)
        curve = regions.trace_region(query)
        rows = [(pt.r2 / scale, pt.r1_max / scale, pt.binding)
                for pt in curve.points]
        _write_csv(out / f"region_{decoder}.csv",
                   ["r2", "r1_max", "binding_condition"], rows)
        report_lines.append(f"[{decoder}]")
        for pt in curve.points:
            certs = "; ".join(c.summary() for c in pt.certificates)
            report_lines.append(f"  r2={pt.r2:.6f} r1={pt.r1_max:.6f} "
                                f"binding={pt.binding} :: {certs}")
    (out / "region_report.txt").write_text("\n".join(report_lines) + "\n",
                                           encoding="utf-8")
    _write_metadata(out, config, seed, bits)
    return 0


def cmd_exponent(config: dict, out: Path, seed: int, bits: bool) -> int:
    spec = spec_from_config(config)
    section = config.get("exponent", {})
    kind = section.get("kind",
                       "type1-cognitive" if spec.mac_kind == "cognitive"
                       else "type1-standard")
    fn = {"type1-standard": exponent_type1_standard,
          "type2-standard": exponent_type2_standard,
          "type1-cognitive": exponent_type1_cognitive}.get(kind)
    if fn is None:
        raise MismacError(f"unknown exponent kind {kind!r}")
    d = int(section.get("denominator", 12))
    refine = bool(section.get("refine", False))
    r1_grid = [float(v) for v in section.get("r1_grid", [0.05, 0.1, 0.2])]
    r2_grid = [float(v) for v in section.get("r2_grid", [0.05, 0.1, 0.2])]
    scale = _rate_scale(bits)
    rows = []
    for r1 in r1_grid:
        for r2 in r2_grid:
            query = ExponentQuery(spec=spec, r1=r1, r2=r2,
                                  outer_grid_denominator=d, refine=refine)
            report = fn(query)
            rows.append((r1 / scale, r2 / scale, report.value / scale, d))
    _write_csv(out / "exponent.csv",
               ["r1", "r2", "value", "grid_denominator"], rows)
    _write_metadata(out, config, seed, bits)
    return 0


def cmd_simulate(config: dict, out: Path, seed: int, bits: bool) -> int:
    spec = spec_from_config(config)
    section = config.get("simulate", {})
    n_values = [int(v) for v in section.get("n_values", [4])]
    m1 = int(section.get("m1", 2))
    m2 = int(section.get("m2", 2))
    decoders = section.get("decoders", ["successive", "max-metric"])
    trials = int(section.get("trials", 10000))
    mode = section.get("mode", "auto")
    redraw = bool(section.get("redraw_codebook", False))
    jobs = [(n, decoder) for n in n_values for decoder in decoders]

    def run(job):
        n, decoder = job
        exact_ok = spec.alphabets.ny ** n <= simulate.EXACT_OUTPUT_GUARD
        if mode == "exact" or (mode == "auto" and exact_ok and not redraw):
            cb = simulate.sample_codebook(spec, n, m1, m2, seed)
            value = simulate.exact_error_probability(cb, spec, decoder)
            return (n, decoder, "exact", value, value, value, 0)
        target = simulate.Ensemble(n, m1, m2) if redraw \
            else simulate.sample_codebook(spec, n, m1, m2, seed)
        est, (lo, hi) = simulate.monte_carlo_error(target, spec, decoder,
                                                   trials, seed)
        return (n, decoder, "monte-carlo", est, lo, hi, trials)

    workers = min(thread_count(), len(jobs)) or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    rows = [(n, decoder, method, value, lo, hi, ntrials)
            for n, decoder, method, value, lo, hi, ntrials in results]
    _write_csv(out / "simulate.csv",
               ["n", "decoder", "method", "estimate", "wilson_lo",
                "wilson_hi", "trials"], rows)

    failures = []
    if bool(section.get("identity_check", False)):
        lines = []
        matched = spec.matched()
        for n in n_values:
            cb = simulate.sample_codebook(spec, n, m1, m2, seed)
            pr_s = simulate.exact_error_probability(cb, spec, "successive")
            pr_g = simulate.exact_error_probability(cb, spec, "genie")
            # the half-bound compares the matched decoders on the same codebook
            pr_sm = simulate.exact_error_probability(cb, matched, "successive")
            pr_ml = simulate.exact_error_probability(cb, matched, "max-metric")
            ok_g = abs(pr_s - pr_g) <= 1e-12
            ok_ml = pr_ml >= 0.5 * pr_sm - 1e-12
            lines.append(f"n={n} Pr_S={pr_s:.12g} Pr_Genie={pr_g:.12g} "
                         f"Pr_S(matched)={pr_sm:.12g} Pr_ML={pr_ml:.12g} "
                         f"genie={'ok' if ok_g else 'FAIL'} "
                         f"half-bound={'ok' if ok_ml else 'FAIL'}")
            if not (ok_g and ok_ml):
                failures.append(f"decoder identity check failed at n={n}")
        (out / "identity_check.txt").write_text("\n".join(lines) + "\n",
                                                encoding="utf-8")
    _write_metadata(out, config, seed, bits)
    if failures:
        print("\n".join(failures), file=sys.stderr)
        return 1
    return 0


def _sandwich_checks(spec: ChannelSpec, d: int, r2_values, bias: float,
                     tolerances: Tolerances):
    """Solver-vs-grid brackets for every assembled program family."""
    checks = []
    p = spec.p_joint
    eps_min = grid_epsilon(d, scale=float(os.environ.get("MMAC_EPS_SCALE", 2.0)))

    def add(name, program):
        from .errors import EmptyFeasibleSet
        if program.sense == "max":
            solver = maximize_concave(program, tolerances).value
            try:
                grid = grid_maximize(program, d).value
            except EmptyFeasibleSet:
                grid = float("-inf")
            solver += bias
            # the grid optimizes over a restricted set: it must not win
            ok = grid <= solver + tolerances.opt_tol
            ok = ok and (np.isinf(grid) or abs(solver - grid) <= eps_min)
        else:
            solver = minimize(program, tolerances).value
            try:
                grid = grid_minimize(program, d).value
            except EmptyFeasibleSet:
                grid = float("inf")
            solver += bias
            ok = solver <= grid + tolerances.opt_tol
            ok = ok and (np.isinf(grid) or abs(solver - grid) <= eps_min)
        checks.append((name, ok, solver, grid))

    if spec.mac_kind == "standard":
        add("user2-bound", regions.t2_program(spec, p))
        for r2 in r2_values:
            fl = regions.f_under(spec, p, r2, tolerances).f_under
            add(f"score-floor r2={r2:g}",
                regions.f_inner_program(spec, p, r2))
            add(f"metric-only r2={r2:g}",
                regions.metric_only_program(spec, p, fl))
            add(f"companion-cut r2={r2:g}",
                regions.companion_cut_program(spec, p, r2, fl))
            add(f"companion-penalty r2={r2:g}",
                regions.companion_penalty_program(spec, p, r2, fl))
            value, _, _ = regions.r1_bound_maxmetric(spec, r2)
            add(f"sum-cut r2={r2:g}",
                regions.maxmetric_sum_program(spec, p, value, r2))
    else:
        add("user2-bound", regions.t2_cognitive_program(spec, p))
        for r2 in r2_values:
            fl = regions.f_under(spec, p, r2, tolerances).f_under
            add(f"score-floor r2={r2:g}",
                regions.f_inner_cognitive_program(spec, p, r2))
            add(f"direct-cut r2={r2:g}",
                regions.direct_cognitive_program(spec, p, r2, fl))
            add(f"rate-penalty r2={r2:g}",
                regions.penalty_cognitive_program(spec, p, r2, fl))
            value, _, _ = regions.r1_bound_maxmetric(spec, r2)
            add(f"sum-cut r2={r2:g}",
                regions.maxmetric_sum_cognitive_program(spec, p, value))
    return checks


def cmd_validate(config: dict, out: Path, seed: int, bits: bool) -> int:
    spec = spec_from_config(config)
    section = config.get("validate", {})
    d = int(section.get("denominator", 8))
    r2_values = [float(v) for v in section.get("r2_values", [0.0, 0.2])]
    bias = float(section.get("solver_bias", 0.0))  # test hook
    tolerances = Tolerances()
    rows = []
    failures = 0

    for name, ok, solver, grid in _sandwich_checks(spec, d, r2_values, bias,
                                                   tolerances):
        rows.append((f"sandwich {name}", ok, solver, grid))
        failures += 0 if ok else 1

    # invariants
    p = spec.p_joint
    base = metric_expectation(p, spec.log_metric)
    for r2 in r2_values:
        fv = regions.f_under(spec, p, r2, tolerances)
        ok = fv.f_under >= base - 1e-12
        rows.append((f"score-floor dominance r2={r2:g}", ok, fv.f_under, base))
        failures += 0 if ok else 1
    matched = spec.matched()
    for r2 in (0.0, 0.1):
        s, _, _ = regions.r1_bound_successive(matched, r2)
        m, _, _ = regions.r1_bound_maxmetric(matched, r2)
        ok = abs(s - m) <= 1e-3
        rows.append((f"matched collapse r2={r2:g}", ok, s, m))
        failures += 0 if ok else 1

    lines = []
    for name, ok, a, b in rows:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name:40s} "
                     f"solver={a:.6f} reference={b:.6f}")
    table = "\n".join(lines)
    print(table)
    (out / "validate.txt").write_text(table + "\n", encoding="utf-8")
    _write_metadata(out, config, seed, bits)
    return 1 if failures else 0


def _write_metadata(out: Path, config: dict, seed: int, bits: bool) -> None:
    meta = {"config": config, "seed": seed,
            "rate_units": "bits" if bits else "nats"}
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mismac",
        description="Rate regions, exponents and decoder simulation for "
                    "mismatched two-user MACs")
    parser.add_argument("command",
                        choices=["region", "exponent", "simulate", "validate"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--bits", action="store_true",
                        help="report rates in bits instead of nats")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        seed = args.seed if args.seed is not None \
            else int(config.get("seed", 0))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {"region": cmd_region, "exponent": cmd_exponent,
                   "simulate": cmd_simulate, "validate": cmd_validate}
        return handler[args.command](config, out, seed, args.bits)
    except (MismacError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
