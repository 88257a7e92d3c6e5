"""Constant-composition codebooks, decoders and error-probability estimates.

Codewords are drawn uniformly from fixed-composition type classes (seeded
permutations of a fixed multiset); the cognitive ensemble superimposes
satellites with a fixed conditional composition on each cloud center.  All
decoder arithmetic runs in the log domain and exact ties are broken as
errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelSpec
from .errors import BudgetExceeded, InvalidConfig
from .probability import JointType, closest_type

TIE = -1
TIE_SLACK = 1e-12
EXACT_OUTPUT_GUARD = 10**7


@dataclass(frozen=True)
class Codebook:
    mac_kind: str
    x1: np.ndarray  # (m1, n)
    x2: np.ndarray  # (m2, n) standard, (m1, m2, n) cognitive
    n: int
    composition1: np.ndarray
    composition2: np.ndarray  # per-user counts or joint (nx1, nx2) counts

    @property
    def m1(self) -> int:
        return self.x1.shape[0]

    @property
    def m2(self) -> int:
        return self.x2.shape[-2] if self.mac_kind == "cognitive" else self.x2.shape[0]


@dataclass(frozen=True)
class Ensemble:
    """Parameters of the random-coding ensemble for per-trial redraws."""

    n: int
    m1: int
    m2: int


@dataclass(frozen=True)
class DecodeOutcome:
    m1_hat: int
    m2_hat: int
    scores: np.ndarray


@dataclass(frozen=True)
class EnumeratorSample:
    joint_type: JointType
    count: int


def sample_codebook(spec: ChannelSpec, n: int, m1: int, m2: int,
                    seed) -> Codebook:
    """Draw a constant-composition codebook with a seeded generator."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    nx1, nx2, _ = spec.alphabets.shape
    if spec.mac_kind == "standard":
        comp1 = closest_type(spec.q1, n)
        comp2 = closest_type(spec.q2, n)
        base1 = np.repeat(np.arange(nx1), comp1)
        base2 = np.repeat(np.arange(nx2), comp2)
        x1 = rng.permuted(np.tile(base1, (m1, 1)), axis=1)
        x2 = rng.permuted(np.tile(base2, (m2, 1)), axis=1)
        return Codebook("standard", x1, x2, n, comp1, comp2)
    comp12 = closest_type(spec.q12, n)
    comp1 = comp12.sum(axis=1)
    base1 = np.repeat(np.arange(nx1), comp1)
    x1 = rng.permuted(np.tile(base1, (m1, 1)), axis=1)
    x2 = np.zeros((m1, m2, n), dtype=np.int64)
    for i in range(m1):
        for a in range(nx1):
            idx = np.where(x1[i] == a)[0]
            base = np.repeat(np.arange(nx2), comp12[a])
            for j in range(m2):
                x2[i, j, idx] = rng.permutation(base)
    return Codebook("cognitive", x1, x2, n, comp1, comp12)


def _pair_logscores(codebook: Codebook, table: np.ndarray,
                    ys: np.ndarray) -> np.ndarray:
    """Per-pair log scores, shape (m1, m2, B), for a batch of outputs.

    ``table`` is a per-cell log table (log metric or log channel); -inf
    entries propagate so zero-metric pairs never win.
    """
    ys = np.atleast_2d(ys)
    if codebook.mac_kind == "standard":
        terms = table[codebook.x1[:, None, None, :],
                      codebook.x2[None, :, None, :],
                      ys[None, None, :, :]]
    else:
        terms = table[codebook.x1[:, None, None, :],
                      codebook.x2[:, :, None, :],
                      ys[None, None, :, :]]
    with np.errstate(invalid="ignore"):
        return terms.sum(axis=-1)


def _argmax_with_tie(scores: np.ndarray, axis: int = 0):
    """(argmax, tie flag) along an axis with a relative tie slack."""
    top = np.max(scores, axis=axis)
    hat = np.argmax(scores, axis=axis)
    if scores.shape[axis] == 1:
        return hat, np.zeros(np.shape(top), dtype=bool)
    second = np.partition(scores, -2, axis=axis).take(-2, axis=axis)
    slack = TIE_SLACK * np.maximum(1.0, np.abs(top))
    with np.errstate(invalid="ignore"):
        tie = (top - second) <= slack
    # all-(-inf) columns never single out a winner
    tie = np.where(np.isneginf(top), True, tie)
    return hat, np.asarray(tie, dtype=bool)


def _log_metric_table(spec: ChannelSpec, decoder_kind: str) -> np.ndarray:
    if decoder_kind == "matched-ml":
        spec = spec.matched()
    return spec.log_metric


def decode_successive(codebook: Codebook, y: np.ndarray,
                      spec: ChannelSpec) -> DecodeOutcome:
    scores = _pair_logscores(codebook, spec.log_metric, np.asarray(y))[:, :, 0]
    step1 = logsumexp(scores, axis=1)
    i_hat, tie1 = _argmax_with_tie(step1[:, None], axis=0)
    if bool(tie1[0]):
        return DecodeOutcome(TIE, TIE, scores)
    i_hat = int(i_hat[0])
    j_hat, tie2 = _argmax_with_tie(scores[i_hat][:, None], axis=0)
    if bool(tie2[0]):
        return DecodeOutcome(i_hat, TIE, scores)
    return DecodeOutcome(i_hat, int(j_hat[0]), scores)


def decode_maxmetric(codebook: Codebook, y: np.ndarray,
                     spec: ChannelSpec) -> DecodeOutcome:
    scores = _pair_logscores(codebook, spec.log_metric, np.asarray(y))[:, :, 0]
    flat = scores.reshape(-1)
    k_hat, tie = _argmax_with_tie(flat[:, None], axis=0)
    if bool(tie[0]):
        return DecodeOutcome(TIE, TIE, scores)
    k = int(k_hat[0])
    return DecodeOutcome(k // codebook.m2, k % codebook.m2, scores)


def decode_genie(codebook: Codebook, y: np.ndarray, true_m1: int,
                 spec: ChannelSpec) -> DecodeOutcome:
    scores = _pair_logscores(codebook, spec.log_metric, np.asarray(y))[:, :, 0]
    step1 = logsumexp(scores, axis=1)
    i_hat, tie1 = _argmax_with_tie(step1[:, None], axis=0)
    m1_hat = TIE if bool(tie1[0]) else int(i_hat[0])
    j_hat, tie2 = _argmax_with_tie(scores[true_m1][:, None], axis=0)
    if bool(tie2[0]):
        return DecodeOutcome(m1_hat, TIE, scores)
    return DecodeOutcome(m1_hat, int(j_hat[0]), scores)


def _all_outputs(ny: int, n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.zeros((idx.size, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = idx % ny
        idx = idx // ny
    return out


def exact_error_probability(codebook: Codebook, spec: ChannelSpec,
                            decoder_kind: str) -> float:
    """Exact average error probability over messages and channel outputs."""
    ny = spec.alphabets.ny
    n = codebook.n
    total_outputs = ny ** n
    if total_outputs > EXACT_OUTPUT_GUARD:
        raise BudgetExceeded("output space too large for exact enumeration")
    m1, m2 = codebook.m1, codebook.m2
    table = _log_metric_table(spec, decoder_kind)
    with np.errstate(divide="ignore"):
        logw = np.where(spec.w > 0, np.log(np.where(spec.w > 0, spec.w, 1.0)),
                        -np.inf)
    batch = max(1, int(4_000_000 / max(1, m1 * m2 * n)))
    pe = 0.0
    for start in range(0, total_outputs, batch):
        ys = _all_outputs(ny, n, start, min(start + batch, total_outputs))
        lq = _pair_logscores(codebook, table, ys)          # (m1, m2, B)
        lw = _pair_logscores(codebook, logw, ys)
        with np.errstate(over="ignore"):
            wn = np.exp(lw)                                # channel weights
        err = _decoder_error_mask(lq, decoder_kind, m1, m2)
        pe += float((wn * err).sum()) / (m1 * m2)
    return pe


def _decoder_error_mask(lq: np.ndarray, decoder_kind: str,
                        m1: int, m2: int) -> np.ndarray:
    """Boolean error indicator of shape (m1, m2, B) per true message pair."""
    nb = lq.shape[2]
    if decoder_kind in ("max-metric", "matched-ml"):
        flat = lq.reshape(m1 * m2, nb)
        k_hat, tie = _argmax_with_tie(flat, axis=0)
        truth = np.arange(m1 * m2)[:, None]
        err = tie[None, :] | (k_hat[None, :] != truth)
        return err.reshape(m1, m2, nb)
    step1 = logsumexp(lq, axis=1)                          # (m1, B)
    i_hat, tie1 = _argmax_with_tie(step1, axis=0)
    step1_err = tie1[None, :] | (i_hat[None, :] != np.arange(m1)[:, None])
    if decoder_kind == "successive":
        rows = lq[i_hat, :, np.arange(nb)].T               # (m2, B)
        j_hat, tie2 = _argmax_with_tie(rows, axis=0)
        step2_err = tie2[None, :] | (j_hat[None, :] != np.arange(m2)[:, None])
        return step1_err[:, None, :] | step2_err[None, :, :]
    if decoder_kind == "genie":
        j_hat, tie2 = _argmax_with_tie(lq, axis=1)         # per true i
        step2_err = tie2[:, None, :] | (j_hat[:, None, :]
                                        != np.arange(m2)[None, :, None])
        return step1_err[:, None, :] | step2_err
    raise InvalidConfig(f"unknown decoder kind {decoder_kind!r}")


def _sample_output(rng: np.random.Generator, w_rows: np.ndarray) -> np.ndarray:
    u = rng.random(w_rows.shape[0])
    return (w_rows.cumsum(axis=1) > u[:, None]).argmax(axis=1)


def wilson_interval(errors: int, trials: int,
                    z: float = 1.959963984540054) -> tuple[float, float]:
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials
                                 + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def monte_carlo_error(codebook_or_ensemble: Union[Codebook, Ensemble],
                      spec: ChannelSpec, decoder_kind: str, trials: int,
                      seed: int) -> tuple[float, tuple[float, float]]:
    """Monte-Carlo error estimate with a Wilson 95% interval.

    A fixed :class:`Codebook` is reused across trials; an :class:`Ensemble`
    redraws the codebook each trial to estimate the ensemble average.  Each
    trial derives its own generator from (seed, trial), so the result does
    not depend on execution order.
    """
    if trials < 1:
        raise InvalidConfig("trials must be positive")
    table = _log_metric_table(spec, decoder_kind)
    fixed = codebook_or_ensemble if isinstance(codebook_or_ensemble, Codebook) \
        else None
    errors = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        cb = fixed if fixed is not None else sample_codebook(
            spec, codebook_or_ensemble.n, codebook_or_ensemble.m1,
            codebook_or_ensemble.m2, rng)
        i = int(rng.integers(cb.m1))
        j = int(rng.integers(cb.m2))
        if cb.mac_kind == "standard":
            rows = spec.w[cb.x1[i], cb.x2[j], :]
        else:
            rows = spec.w[cb.x1[i], cb.x2[i, j], :]
        y = _sample_output(rng, rows)
        lq = _pair_logscores(cb, table, y[None, :])
        err = _decoder_error_mask(lq, decoder_kind, cb.m1, cb.m2)
        errors += int(err[i, j, 0])
    estimate = errors / trials
    return estimate, wilson_interval(errors, trials)


def type_enumerator_profile(codebook: Codebook, x1bar: np.ndarray,
                            y: np.ndarray, spec: Optional[ChannelSpec] = None,
                            center: Optional[int] = None) -> list:
    """Counts of competitor codewords per joint type with (x1bar, y).

    Standard MAC: competitors are user-2 codewords j != 1 (the first one is
    held out as the transmitted word).  Cognitive MAC: all satellites of the
    given center.
    """
    if spec is not None:
        nx1, nx2, ny = spec.alphabets.shape
    else:
        nx1, nx2, ny = _infer_sizes(codebook, x1bar, y)
    if codebook.mac_kind == "cognitive":
        if center is None:
            raise InvalidConfig("cognitive profile needs a center index")
        competitors = codebook.x2[center]
    else:
        competitors = codebook.x2[1:]
    x1bar = np.asarray(x1bar)
    y = np.asarray(y)
    cells = (x1bar[None, :] * nx2 + competitors) * ny + y[None, :]
    ncells = nx1 * nx2 * ny
    profile: dict = {}
    for row in cells:
        counts = np.bincount(row, minlength=ncells)
        key = counts.tobytes()
        if key in profile:
            profile[key] = (profile[key][0], profile[key][1] + 1)
        else:
            profile[key] = (counts.reshape(nx1, nx2, ny), 1)
    return [EnumeratorSample(JointType.from_counts(counts, codebook.n), cnt)
            for counts, cnt in sorted(profile.values(),
                                      key=lambda it: it[0].ravel().tolist())]


def _infer_sizes(codebook: Codebook, x1bar, y) -> tuple[int, int, int]:
    nx1 = int(max(int(np.max(x1bar)) + 1, codebook.composition1.shape[0]))
    if codebook.mac_kind == "cognitive":
        nx2 = codebook.composition2.shape[1]
    else:
        nx2 = codebook.composition2.shape[0]
    ny = int(np.max(y)) + 1
    return nx1, nx2, ny


def enumerator_mean_exact(n: int, comp2: np.ndarray, x1bar: np.ndarray,
                          y: np.ndarray, type_counts: np.ndarray,
                          competitors: int) -> float:
    """Exact expected enumerator count for one joint type.

    The probability that a uniform fixed-composition draw lands in the given
    joint type with (x1bar, y) is a ratio of multinomial coefficients over
    the per-(x1, y)-class position counts.
    """
    x1bar = np.asarray(x1bar)
    y = np.asarray(y)
    counts = np.asarray(type_counts, dtype=np.int64)
    nx1, nx2, ny = counts.shape
    if counts.sum() != n:
        raise InvalidConfig("type counts must sum to n")
    if not np.array_equal(counts.sum(axis=(0, 2)), np.asarray(comp2)):
        return 0.0
    prob = Fraction(1)
    for a in range(nx1):
        for c in range(ny):
            m_ac = int(np.sum((x1bar == a) & (y == c)))
            if counts[a, :, c].sum() != m_ac:
                return 0.0
            prob *= _multinomial(m_ac, counts[a, :, c])
    prob /= _multinomial(n, np.asarray(comp2))
    return float(competitors * prob)


def _multinomial(total: int, parts: np.ndarray) -> Fraction:
    num = Fraction(math.factorial(total))
    for k in parts.ravel():
        num /= math.factorial(int(k))
    return num
