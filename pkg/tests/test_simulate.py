import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from mismac import (BudgetExceeded, Ensemble, InvalidConfig,
                    decode_genie, decode_maxmetric, decode_successive,
                    exact_error_probability, monte_carlo_error,
                    sample_codebook, type_enumerator_profile, wilson_interval)
from mismac.probability import enumerate_joint_types
from mismac.simulate import TIE, Codebook, enumerator_mean_exact


class TestCodebooks:
    def test_standard_compositions_hold_per_row(self, std_spec):
        cb = sample_codebook(std_spec, 8, 5, 7, seed=1)
        assert cb.m1 == 5 and cb.m2 == 7 and cb.n == 8
        for row in cb.x1:
            np.testing.assert_array_equal(np.bincount(row, minlength=2),
                                          cb.composition1)
        for row in cb.x2:
            np.testing.assert_array_equal(np.bincount(row, minlength=2),
                                          cb.composition2)

    def test_cognitive_satellites_follow_the_center(self, cog_spec):
        cb = sample_codebook(cog_spec, 8, 3, 4, seed=2)
        assert cb.x2.shape == (3, 4, 8)
        for i in range(3):
            for j in range(4):
                joint = np.zeros((2, 2), dtype=int)
                for a, b in zip(cb.x1[i], cb.x2[i, j]):
                    joint[a, b] += 1
                np.testing.assert_array_equal(joint, cb.composition2)

    def test_seed_determinism(self, std_spec):
        a = sample_codebook(std_spec, 6, 3, 3, seed=11)
        b = sample_codebook(std_spec, 6, 3, 3, seed=11)
        c = sample_codebook(std_spec, 6, 3, 3, seed=12)
        np.testing.assert_array_equal(a.x1, b.x1)
        np.testing.assert_array_equal(a.x2, b.x2)
        assert not (np.array_equal(a.x1, c.x1) and np.array_equal(a.x2, c.x2))


def naive_scores(cb, spec, y):
    """Plain-loop pair scores for cross-checking the vectorized path."""
    out = np.zeros((cb.m1, cb.m2))
    for i in range(cb.m1):
        for j in range(cb.m2):
            x2 = cb.x2[j] if cb.mac_kind == "standard" else cb.x2[i, j]
            prod = 1.0
            for k in range(cb.n):
                prod *= spec.metric[cb.x1[i, k], x2[k], y[k]]
            out[i, j] = prod
    return out


class TestDecoders:
    def test_scores_match_direct_products(self, std_spec, cog_spec):
        rng = np.random.default_rng(5)
        for spec in (std_spec, cog_spec):
            cb = sample_codebook(spec, 5, 3, 3, seed=9)
            y = rng.integers(0, 3, size=5)
            outcome = decode_maxmetric(cb, y, spec)
            np.testing.assert_allclose(np.exp(outcome.scores),
                                       naive_scores(cb, spec, y), rtol=1e-9)

    def test_decisions_match_a_naive_decoder(self, std_spec):
        spec = std_spec
        cb = sample_codebook(spec, 3, 2, 2, seed=3)
        for y in itertools.product(range(3), repeat=3):
            y = np.array(y)
            scores = np.log(naive_scores(cb, spec, y))
            outcome = decode_maxmetric(cb, y, spec)
            flat = scores.ravel()
            order = np.sort(flat)
            if order[-1] - order[-2] <= 1e-12 * max(1.0, abs(order[-1])):
                assert outcome.m1_hat == TIE
            else:
                k = int(np.argmax(flat))
                assert (outcome.m1_hat, outcome.m2_hat) == (k // 2, k % 2)

            outcome = decode_successive(cb, y, spec)
            step1 = logsumexp(scores, axis=1)
            if abs(step1[0] - step1[1]) <= 1e-12 * max(1.0, abs(step1.max())):
                assert outcome.m1_hat == TIE
            else:
                i = int(np.argmax(step1))
                assert outcome.m1_hat == i
                row = scores[i]
                if abs(row[0] - row[1]) <= 1e-12 * max(1.0, abs(row.max())):
                    assert outcome.m2_hat == TIE
                else:
                    assert outcome.m2_hat == int(np.argmax(row))

    def test_genie_step_two_uses_the_true_center(self, std_spec):
        cb = sample_codebook(std_spec, 4, 2, 2, seed=8)
        y = np.array([0, 1, 2, 1])
        for true_i in (0, 1):
            outcome = decode_genie(cb, y, true_i, std_spec)
            scores = outcome.scores
            if outcome.m2_hat != TIE:
                assert outcome.m2_hat == int(np.argmax(scores[true_i]))

    def test_duplicate_codewords_always_tie(self, std_spec):
        base = sample_codebook(std_spec, 4, 2, 2, seed=4)
        x2 = np.tile(base.x2[:1], (2, 1))
        cb = Codebook("standard", base.x1, x2, 4, base.composition1,
                      base.composition2)
        pe = exact_error_probability(cb, std_spec, "successive")
        assert pe == pytest.approx(1.0, abs=1e-12)
        outcome = decode_successive(cb, np.array([0, 1, 2, 1]), std_spec)
        assert outcome.m2_hat == TIE


class TestExact:
    def test_exact_matches_a_naive_sweep(self, std_spec):
        spec = std_spec
        cb = sample_codebook(spec, 3, 2, 2, seed=6)
        pe = {"successive": 0.0, "max-metric": 0.0, "genie": 0.0}
        for y in itertools.product(range(3), repeat=3):
            y = np.array(y)
            for i in range(2):
                for j in range(2):
                    w = math.prod(spec.w[cb.x1[i, k], cb.x2[j, k], y[k]]
                                  for k in range(3))
                    s = decode_successive(cb, y, spec)
                    m = decode_maxmetric(cb, y, spec)
                    g = decode_genie(cb, y, i, spec)
                    pe["successive"] += w * ((s.m1_hat, s.m2_hat) != (i, j))
                    pe["max-metric"] += w * ((m.m1_hat, m.m2_hat) != (i, j))
                    pe["genie"] += w * (g.m1_hat != i or g.m2_hat != j)
        for kind, total in pe.items():
            assert exact_error_probability(cb, spec, kind) \
                == pytest.approx(total / 4.0, abs=1e-12)

    def test_genie_identity_is_exact(self, std_spec, cog_spec):
        for spec, seed in ((std_spec, 21), (cog_spec, 22)):
            cb = sample_codebook(spec, 4, 2, 3, seed=seed)
            ps = exact_error_probability(cb, spec, "successive")
            pg = exact_error_probability(cb, spec, "genie")
            assert ps == pytest.approx(pg, abs=1e-12)

    def test_matched_ml_half_bound(self, std_spec):
        matched = std_spec.matched()
        cb = sample_codebook(matched, 4, 3, 3, seed=23)
        ps = exact_error_probability(cb, matched, "successive")
        pml = exact_error_probability(cb, matched, "max-metric")
        assert pml >= 0.5 * ps - 1e-12

    def test_matched_ml_decoder_kind_overrides_the_metric(self, std_spec):
        cb = sample_codebook(std_spec, 4, 2, 2, seed=24)
        via_kind = exact_error_probability(cb, std_spec, "matched-ml")
        via_spec = exact_error_probability(cb, std_spec.matched(),
                                           "max-metric")
        assert via_kind == pytest.approx(via_spec, abs=1e-15)

    def test_output_space_guard(self, std_spec):
        cb = sample_codebook(std_spec, 16, 2, 2, seed=25)
        with pytest.raises(BudgetExceeded):
            exact_error_probability(cb, std_spec, "successive")

    def test_unknown_decoder_rejected(self, std_spec):
        cb = sample_codebook(std_spec, 3, 2, 2, seed=26)
        with pytest.raises(InvalidConfig):
            exact_error_probability(cb, std_spec, "viterbi")


class TestMonteCarlo:
    def test_interval_contains_the_exact_value(self, std_spec):
        cb = sample_codebook(std_spec, 4, 2, 2, seed=31)
        exact = exact_error_probability(cb, std_spec, "successive")
        est, (lo, hi) = monte_carlo_error(cb, std_spec, "successive",
                                          trials=4000, seed=31)
        assert lo <= exact <= hi
        assert abs(est - exact) < 0.05

    def test_seed_determinism(self, std_spec):
        cb = sample_codebook(std_spec, 4, 2, 2, seed=32)
        a = monte_carlo_error(cb, std_spec, "max-metric", 500, seed=7)
        b = monte_carlo_error(cb, std_spec, "max-metric", 500, seed=7)
        assert a == b

    def test_ensemble_mode_redraws_codebooks(self, std_spec):
        est, (lo, hi) = monte_carlo_error(Ensemble(n=6, m1=2, m2=2),
                                          std_spec, "successive", 400, seed=8)
        assert 0.0 <= lo <= est <= hi <= 1.0

    def test_trials_must_be_positive(self, std_spec):
        cb = sample_codebook(std_spec, 4, 2, 2, seed=33)
        with pytest.raises(InvalidConfig):
            monte_carlo_error(cb, std_spec, "successive", 0, seed=1)

    def test_wilson_interval_basics(self):
        lo, hi = wilson_interval(0, 100)
        assert lo <= 1e-12 and 0.0 < hi < 0.05
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        lo2, hi2 = wilson_interval(500, 1000)
        assert hi2 - lo2 < hi - lo  # more trials, tighter interval
        assert wilson_interval(100, 100)[1] > 0.99


class TestEnumerator:
    def test_profile_counts_cover_all_competitors(self, std_spec):
        cb = sample_codebook(std_spec, 6, 2, 9, seed=41)
        rng = np.random.default_rng(41)
        x1bar = rng.permutation(np.repeat([0, 1], 3))
        y = rng.integers(0, 3, size=6)
        profile = type_enumerator_profile(cb, x1bar, y, spec=std_spec)
        assert sum(s.count for s in profile) == cb.m2 - 1
        for s in profile:
            counts = s.joint_type.counts_array
            assert counts.sum() == 6
            np.testing.assert_array_equal(counts.sum(axis=(0, 2)),
                                          cb.composition2)

    def test_cognitive_profile_needs_a_center(self, cog_spec):
        cb = sample_codebook(cog_spec, 6, 2, 3, seed=42)
        y = np.zeros(6, dtype=int)
        with pytest.raises(InvalidConfig):
            type_enumerator_profile(cb, cb.x1[0], y, spec=cog_spec)
        profile = type_enumerator_profile(cb, cb.x1[0], y, spec=cog_spec,
                                          center=0)
        assert sum(s.count for s in profile) == 3

    def test_exact_means_form_a_distribution(self, std_spec):
        # summed over all candidate joint types, the expected enumerator
        # counts must add up to the number of competitors
        n = 4
        comp2 = np.array([2, 2])
        x1bar = np.array([0, 0, 1, 1])
        y = np.array([0, 2, 1, 1])
        total = 0.0
        for counts in enumerate_joint_types((2, 2, 3), n):
            total += enumerator_mean_exact(n, comp2, x1bar, y, counts,
                                           competitors=17)
        assert total == pytest.approx(17.0, abs=1e-9)

    def test_exact_mean_matches_empirical_average(self, std_spec):
        n = 6
        spec = std_spec
        rng = np.random.default_rng(43)
        x1bar = rng.permutation(np.repeat([0, 1], 3))
        y = rng.integers(0, 3, size=n)
        draws = 3000
        m2 = 21
        totals = {}
        for t in range(draws):
            cb = sample_codebook(spec, n, 2, m2, seed=[43, t])
            for s in type_enumerator_profile(cb, x1bar, y, spec=spec):
                key = s.joint_type
                totals[key] = totals.get(key, 0) + s.count
        comp2 = sample_codebook(spec, n, 2, m2, seed=0).composition2
        checked = 0
        for jt, total in sorted(totals.items(),
                                key=lambda kv: -kv[1])[:4]:
            mean = enumerator_mean_exact(n, comp2, x1bar, y,
                                         jt.counts_array, m2 - 1)
            p = mean / (m2 - 1)
            sigma = math.sqrt((m2 - 1) * p * (1 - p) / draws)
            assert abs(total / draws - mean) <= 5 * sigma + 1e-12
            checked += 1
        assert checked == 4

    def test_mean_is_zero_off_the_composition(self):
        n = 4
        counts = np.zeros((2, 2, 3), dtype=int)
        counts[0, 0, 0] = 4  # x2 composition (4, 0) conflicts with (2, 2)
        assert enumerator_mean_exact(n, np.array([2, 2]),
                                     np.zeros(4, dtype=int),
                                     np.zeros(4, dtype=int), counts, 5) == 0.0
