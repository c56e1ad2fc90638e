import math
import random

import numpy as np
import pytest
from scipy import stats as sps

from pcmi.errors import EmptyGroup, InvalidCounts, NoSpans, PoolTooSmall, WrongAnnotationCount
from pcmi.experiments import (
    Annotation,
    aggregate,
    attribution_report,
    binomial_test,
    build_exp1_pairs,
    build_exp2_pairs,
    build_exp3_pairs,
    distribution_summary,
    fleiss_kappa,
    majority_rate,
    majority_vote,
    simulate_annotations,
)
from pcmi.scoring import ScoreBundle, SpanSet, TokenScoreSeries
from pcmi.selection import ThresholdConfig

from test_selection import make_pool


def anns(pair_id, choices):
    return [Annotation(pair_id, f"a{i}", c) for i, c in enumerate(choices)]


class TestExp1:
    def test_pool_of_two_is_forced(self):
        pool = make_pool([10, 5], [0, 0], instance_id="x")
        (pair,) = build_exp1_pairs([pool], seed=0)
        assert {pair.side_a, pair.side_b} == {0, 1}
        hyp = pair.side_a if pair.hypothesis_side == "A" else pair.side_b
        assert hyp == 0  # max-pmi candidate is the hypothesis side

    def test_deterministic_for_fixed_seed(self):
        pools = [make_pool(list(np.linspace(1, 10, 10)), [0] * 10, instance_id=f"i{j}") for j in range(5)]
        assert build_exp1_pairs(pools, seed=3) == build_exp1_pairs(pools, seed=3)
        assert build_exp1_pairs(pools, seed=3) != build_exp1_pairs(pools, seed=4)

    def test_pool_too_small(self):
        with pytest.raises(PoolTooSmall):
            build_exp1_pairs([make_pool([1], [0])], seed=0)

    def test_opponent_rank_uniform_chi2(self):
        # pool pmi values 10..1: candidate i has rank i+1; opponents are
        # candidates 1..9 (ranks 2..10)
        counts = np.zeros(10)
        for seed in range(10000):
            pool = make_pool(list(range(10, 0, -1)), [0] * 10, instance_id=f"s{seed}")
            (pair,) = build_exp1_pairs([pool], seed=seed)
            opponent = pair.side_b if pair.hypothesis_side == "A" else pair.side_a
            counts[opponent] += 1
        assert counts[0] == 0
        chi2 = ((counts[1:] - 10000 / 9) ** 2 / (10000 / 9)).sum()
        # df=8; reject only far in the tail
        assert chi2 < sps.chi2.ppf(0.999, df=8)

    def test_stratum_metadata(self):
        for seed in range(20):
            pool = make_pool(list(range(10, 0, -1)), [0] * 10, instance_id=f"s{seed}")
            (pair,) = build_exp1_pairs([pool], seed=seed)
            opponent = pair.side_b if pair.hypothesis_side == "A" else pair.side_a
            expected = "top" if opponent + 1 <= 5 else "bottom"
            assert pair.metadata["opponent_stratum"] == expected


class TestExp2:
    def test_minimal_delta_k_pair_selected(self):
        pool = make_pool([50, 40, 30], [0, 20, 16], instance_id="x")
        # pcmi_k values come from s_h offsets in make_pool; rebuild with
        # explicit bundles instead
        from pcmi.scoring import TokenizedText

        def bundle(pch, pck):
            s_none, s_full = -100.0, -10.0
            return ScoreBundle(s_full, s_full - pck, s_full - pch, s_none)

        from pcmi.selection import CandidatePool

        pool = CandidatePool(
            "x",
            [
                (TokenizedText(["a"], [0]), bundle(0.0, 5.0)),
                (TokenizedText(["b"], [1]), bundle(20.0, 5.5)),
                (TokenizedText(["c"], [2]), bundle(16.0, 9.0)),
            ],
        )
        pairs, median_dk = build_exp2_pairs([pool], delta_h_min=15.0, seed=0)
        (pair,) = pairs
        assert {pair.side_a, pair.side_b} == {0, 1}
        assert pair.metadata["delta_pcmi_k"] == pytest.approx(0.5)
        assert median_dk == pytest.approx(0.5)
        hyp = pair.side_a if pair.hypothesis_side == "A" else pair.side_b
        assert hyp == 1  # higher pcmi_h side is the hypothesis

    def test_instance_skipped_when_all_within_cutoff(self):
        pool = make_pool([50, 40], [10, 20], instance_id="y")
        pairs, median_dk = build_exp2_pairs([pool], delta_h_min=15.0)
        assert pairs == [] and median_dk is None

    def test_selected_pairs_satisfy_delta_constraint(self):
        rng = random.Random(5)
        pools = [
            make_pool(
                [rng.uniform(0, 100) for _ in range(8)],
                [rng.uniform(0, 40) for _ in range(8)],
                instance_id=f"i{j}",
            )
            for j in range(30)
        ]
        pairs, _ = build_exp2_pairs(pools, delta_h_min=15.0, seed=1)
        assert pairs
        for pair in pairs:
            assert pair.metadata["delta_pcmi_h"] > 15.0


class TestExp3:
    thresholds = ThresholdConfig(5, 14, 0.5)

    def test_swapped_pool_emits_pair(self):
        pool = make_pool([150, 87, 60, 40], [4, 14, 2, 20], instance_id="z")
        (pair,) = build_exp3_pairs([pool], self.thresholds, seed=0)
        assert {pair.side_a, pair.side_b} == {0, 1}
        assert pair.metadata == {"max_pmi_index": 0, "fused_index": 1, "trace": "swapped"}
        hyp = pair.side_a if pair.hypothesis_side == "A" else pair.side_b
        assert hyp == 1  # fused candidate is the hypothesis side

    def test_default_and_fallback_emit_nothing(self):
        default_pool = make_pool([150, 87], [6, 14], instance_id="d")
        fallback_pool = make_pool([150, 40], [4, 20], instance_id="f")
        assert build_exp3_pairs([default_pool, fallback_pool], self.thresholds) == []


class TestMajorityVote:
    def test_simple_majority(self):
        assert majority_vote(anns("p", ["A", "A", "B"])) == "A"

    def test_three_way_split(self):
        assert majority_vote(anns("p", ["A", "B", "BOTH_NONSENSICAL"])) == "NO_MAJORITY"

    def test_nonsensical_majority(self):
        assert majority_vote(anns("p", ["BOTH_NONSENSICAL", "BOTH_NONSENSICAL", "A"])) == "NONSENSICAL"

    def test_wrong_count(self):
        with pytest.raises(WrongAnnotationCount):
            majority_vote(anns("p", ["A", "B"]))


class TestBinomialTest:
    def test_reference_values(self):
        assert binomial_test(87, 55) == pytest.approx(0.009, abs=0.0005)
        assert 3e-6 / 2 <= binomial_test(95, 70) <= 3e-6 * 2
        assert binomial_test(99, 59) == pytest.approx(0.035, abs=0.001)

    def test_single_tail_term(self):
        assert binomial_test(5, 5) == pytest.approx(1 / 32, abs=1e-12)

    def test_against_scipy_oracle(self):
        rng = random.Random(2)
        for _ in range(50):
            n = rng.randint(1, 200)
            K = rng.randint(0, n)
            expected = sps.binomtest(K, n, 0.5, alternative="greater").pvalue
            assert binomial_test(n, K) == pytest.approx(expected, rel=1e-10)

    def test_monotone_in_K_and_edge_cases(self):
        values = [binomial_test(40, k) for k in range(41)]
        assert values == sorted(values, reverse=True)
        assert binomial_test(40, 0) == pytest.approx(1.0)

    def test_invalid_counts(self):
        with pytest.raises(InvalidCounts):
            binomial_test(5, 6)


class TestFleissKappa:
    def test_perfect_agreement_mixed_categories(self):
        table = [[3, 0, 0], [0, 3, 0], [3, 0, 0], [0, 0, 3]]
        assert fleiss_kappa(table) == pytest.approx(1.0)

    def test_hand_computed_two_items(self):
        # P_i = 1/3 each, P_bar = 1/3, p_j = (.5, .5, 0), P_e = .5
        # kappa = (1/3 - 1/2) / (1 - 1/2) = -1/3
        assert fleiss_kappa([[2, 1, 0], [1, 2, 0]]) == pytest.approx(-1 / 3, abs=1e-9)

    def test_degenerate_agreement_returns_one(self):
        assert fleiss_kappa([[3, 0, 0], [3, 0, 0]]) == 1.0

    def test_unequal_raters_rejected(self):
        with pytest.raises(WrongAnnotationCount):
            fleiss_kappa([[2, 1, 0], [1, 1, 0]])


class TestAggregate:
    def test_full_path(self):
        pools = [make_pool([10, 5], [0, 0], instance_id=f"i{j}") for j in range(5)]
        pairs = build_exp1_pairs(pools, seed=0)
        annotations = []
        # 4 majorities for the hypothesis side, 1 against
        for i, pair in enumerate(pairs):
            winner = pair.hypothesis_side if i < 4 else ("B" if pair.hypothesis_side == "A" else "A")
            other = "B" if winner == "A" else "A"
            annotations += anns(pair.pair_id, [winner, winner, other])
        (result,) = aggregate(pairs, annotations)
        assert (result.experiment, result.n, result.K) == ("EXP1", 5, 4)
        assert result.p_value == pytest.approx(binomial_test(5, 4))

    def test_nonsensical_and_split_pairs_excluded_from_n(self):
        pools = [make_pool([10, 5], [0, 0], instance_id=f"i{j}") for j in range(3)]
        pairs = build_exp1_pairs(pools, seed=0)
        annotations = (
            anns(pairs[0].pair_id, [pairs[0].hypothesis_side] * 3)
            + anns(pairs[1].pair_id, ["BOTH_NONSENSICAL", "BOTH_NONSENSICAL", "A"])
            + anns(pairs[2].pair_id, ["A", "B", "BOTH_NONSENSICAL"])
        )
        (result,) = aggregate(pairs, annotations)
        assert (result.n, result.K) == (1, 1)


class TestDistributionSummary:
    def bundles(self, pcmi_h_values):
        return [ScoreBundle(v - 100.0, -50.0, -100.0, -120.0) for v in pcmi_h_values]

    def test_quartiles_match_calibration_example(self):
        summary = distribution_summary({"ALL": self.bundles(range(1, 9))})
        q = summary["quartiles"]["ALL"]["pcmi_h"]
        assert (q["q1"], q["q3"]) == (pytest.approx(2.75), pytest.approx(6.25))

    def test_single_element_group(self):
        summary = distribution_summary({"ALL": self.bundles([4.0])})
        q = summary["quartiles"]["ALL"]["pcmi_h"]
        assert len({q["min"], q["q1"], q["median"], q["q3"], q["max"]}) == 1

    def test_histogram_shape_and_mass(self):
        summary = distribution_summary({"ALL": self.bundles(range(20))}, bins=50)
        hist = summary["histograms"]["ALL"]
        assert hist.shape == (50, 50)
        assert hist.sum() == 20

    def test_empty_group_rejected(self):
        with pytest.raises(EmptyGroup):
            distribution_summary({"ALL": []})


class TestAttributionReport:
    def series(self, logp_full, logp_h, logp_k, logp_none):
        return TokenScoreSeries(logp_full, logp_h, logp_k, logp_none)

    def test_full_span_gives_ratio_one(self):
        s = self.series([-1.0, -2.0], [-3.0, -4.0], [-5.0, -6.0], [-7.0, -8.0])
        report = attribution_report([(s, SpanSet([(0, 2)]))])
        assert report == {"pcmi_h": 1.0, "pmi_h": 1.0, "pcmi_k": 1.0}

    def test_concentrated_pcmi_h_mass(self):
        # pcmi_h mass only on token 0 (inside the span); the other score
        # types are spread evenly over 4 tokens
        logp_full = [-1.0, -2.0, -2.0, -2.0]
        logp_k = [-5.0, -2.0, -2.0, -2.0]  # pcmi_h = [4, 0, 0, 0]
        logp_h = [-2.0, -3.0, -3.0, -3.0]  # pcmi_k = [1, 1, 1, 1]
        logp_none = [-3.0, -4.0, -4.0, -4.0]  # pmi_h = [1, 1, 1, 1]
        s = self.series(logp_full, logp_h, logp_k, logp_none)
        report = attribution_report([(s, SpanSet([(0, 1)]))])
        assert report["pcmi_h"] == pytest.approx(1.0)
        assert report["pmi_h"] == pytest.approx(0.25)
        assert report["pcmi_k"] == pytest.approx(0.25)

    def test_no_spans(self):
        with pytest.raises(NoSpans):
            attribution_report([])


class TestSimulation:
    def test_majority_rate_formula(self):
        assert majority_rate(1.0) == 1.0
        assert majority_rate(0.5) == pytest.approx(0.5)
        assert majority_rate(0.0) == 0.0

    def test_planted_preference_recovered(self):
        q = 0.63
        pools = [make_pool([10, 5], [0, 0], instance_id=f"i{j}") for j in range(100)]
        pairs = build_exp1_pairs(pools, seed=0)
        expected = majority_rate(q)
        inside = 0
        n_experiments = 200
        for exp in range(n_experiments):
            annotations = simulate_annotations(pairs, q, seed=exp)
            (result,) = aggregate(pairs, annotations)
            assert result.n == len(pairs)  # two categories, three raters
            lo, hi = sps.binom.interval(0.95, result.n, expected)
            if lo <= result.K <= hi:
                inside += 1
        # ~95% of experiments should cover the analytic majority rate
        assert inside / n_experiments >= 0.90
