import math
import random

import pytest

from pcmi.errors import EmptyPool, IndexOutOfRange, InsufficientData
from pcmi.scoring import ScoreBundle, TokenizedText
from pcmi.selection import (
    CandidatePool,
    ThresholdConfig,
    calibrate_thresholds,
    fused_pcmi_select,
    max_pmi_select,
    pmi_acceptable,
    selection_record,
)


def make_pool(pmi_hk, pcmi_h, instance_id="inst"):
    # back-solve sums: s_none = -1000, s_full = s_none + pmi_hk,
    # s_k = s_full - pcmi_h, s_h arbitrary
    candidates = []
    for i, (pmi, pch) in enumerate(zip(pmi_hk, pcmi_h)):
        s_none = -1000.0
        s_full = s_none + pmi
        s_k = s_full - pch
        s_h = s_full - 7.0 - i
        candidates.append((TokenizedText([f"c{i}"], [i]), ScoreBundle(s_full, s_h, s_k, s_none)))
    return CandidatePool(instance_id=instance_id, candidates=candidates)


def bundle_with_pcmi_h(value):
    return ScoreBundle(s_full=value - 100.0, s_h=-50.0, s_k=-100.0, s_none=-120.0)


class TestMaxPmi:
    def test_reference_example(self):
        pool = make_pool([87, 150], [14, 4])
        assert max_pmi_select(pool) == 1

    def test_single_candidate(self):
        assert max_pmi_select(make_pool([3], [1])) == 0

    def test_tie_break_lowest_index(self):
        assert max_pmi_select(make_pool([5, 5, 3], [0, 0, 0])) == 0

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            max_pmi_select(CandidatePool("x", []))


class TestCalibrate:
    def test_one_to_eight(self):
        bundles = [bundle_with_pcmi_h(v) for v in range(1, 9)]
        t = calibrate_thresholds(bundles)
        assert t.pcmi_h_low == pytest.approx(2.75)
        assert t.pcmi_h_high == pytest.approx(6.25)

    def test_constant_values(self):
        t = calibrate_thresholds([bundle_with_pcmi_h(3.5)] * 6)
        assert t.pcmi_h_low == t.pcmi_h_high == pytest.approx(3.5)

    def test_too_few(self):
        with pytest.raises(InsufficientData):
            calibrate_thresholds([bundle_with_pcmi_h(1)] * 3)


class TestPmiAcceptable:
    def test_rank_cutoff_n10(self):
        pool = make_pool(list(range(10, 0, -1)), [0] * 10)
        # candidate i has rank i+1
        assert pmi_acceptable(pool, 4, 0.5) is True  # rank 5
        assert pmi_acceptable(pool, 5, 0.5) is False  # rank 6

    def test_n2_only_max_acceptable(self):
        pool = make_pool([10, 5], [0, 0])
        assert pmi_acceptable(pool, 0, 0.5) is True
        assert pmi_acceptable(pool, 1, 0.5) is False

    def test_single_always_acceptable(self):
        assert pmi_acceptable(make_pool([1], [0]), 0, 0.5) is True

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            pmi_acceptable(make_pool([1], [0]), 3, 0.5)


THRESHOLDS = ThresholdConfig(5, 14, 0.5)


class TestFusedPcmi:
    def test_swap_example(self):
        pool = make_pool([150, 87, 60, 40], [4, 14, 2, 20])
        index, trace = fused_pcmi_select(pool, THRESHOLDS)
        assert (index, trace) == (1, "swapped")

    def test_default_when_not_low(self):
        pool = make_pool([150, 87, 60, 40], [6, 14, 2, 20])
        assert fused_pcmi_select(pool, THRESHOLDS) == (0, "default")

    def test_fallback_when_no_acceptable_alternative(self):
        pool = make_pool([150, 40], [4, 20])
        assert fused_pcmi_select(pool, THRESHOLDS) == (0, "fallback")

    def test_boundary_pcmi_h_counts_as_high(self):
        # a candidate at exactly the high threshold qualifies
        pool = make_pool([100, 90, 10, 5], [4, 14, 0, 0])
        assert fused_pcmi_select(pool, THRESHOLDS) == (1, "swapped")


def brute_force_fused(pool, thresholds):
    """Literal restatement of the selection rule, kept independent of the
    library implementation."""
    pmis = [b.pmi_hk for _, b in pool.candidates]
    pchs = [b.pcmi_h for _, b in pool.candidates]
    n = len(pmis)
    best = max(pmis)
    m = min(i for i in range(n) if pmis[i] == best)
    if pchs[m] >= thresholds.pcmi_h_low:
        return m, "default"
    cutoff = math.ceil(n * thresholds.pmi_acceptable_fraction)
    ranked = sorted(range(n), key=lambda i: (-pmis[i], i))
    acceptable = set(ranked[:cutoff])
    options = [i for i in range(n) if pchs[i] >= thresholds.pcmi_h_high and i in acceptable]
    if not options:
        return m, "fallback"
    best_pmi = max(pmis[i] for i in options)
    return min(i for i in options if pmis[i] == best_pmi), "swapped"


def random_pool(rng, instance_id="p"):
    n = rng.randint(1, 12)
    pmi = [rng.choice([rng.uniform(0, 200), float(rng.randint(0, 40))]) for _ in range(n)]
    pch = [rng.choice([rng.uniform(-5, 30), float(rng.randint(0, 20))]) for _ in range(n)]
    return make_pool(pmi, pch, instance_id=instance_id)


class TestOracleEquivalence:
    def test_10k_random_pools(self):
        rng = random.Random(20240817)
        disagreements = 0
        for i in range(10000):
            pool = random_pool(rng, instance_id=f"p{i}")
            low = rng.uniform(-2, 15)
            thresholds = ThresholdConfig(low, low + rng.uniform(0, 15), 0.5)
            got = fused_pcmi_select(pool, thresholds)
            want = brute_force_fused(pool, thresholds)
            if got != want:
                disagreements += 1
            # swaps only ever happen when the Max-PMI pick is low on pcmi_h
            m = max_pmi_select(pool)
            if got[1] != "default":
                assert pool.bundle(m).pcmi_h < thresholds.pcmi_h_low
            if got[1] == "swapped":
                swapped = pool.bundle(got[0])
                assert swapped.pcmi_h >= thresholds.pcmi_h_high
                assert pmi_acceptable(pool, got[0], 0.5)
        assert disagreements == 0


class TestInvariances:
    def test_constant_s_none_shift_preserves_choice(self):
        rng = random.Random(7)
        for i in range(300):
            pool = random_pool(rng)
            shift = rng.uniform(-50, 50)
            shifted = CandidatePool(
                pool.instance_id,
                [
                    (t, ScoreBundle(b.s_full, b.s_h, b.s_k, b.s_none + shift))
                    for t, b in pool.candidates
                ],
            )
            # pmi ranks shift equally; pcmi_* are untouched, so fused-pcmi
            # decisions must not change
            assert max_pmi_select(pool) == max_pmi_select(shifted)
            assert fused_pcmi_select(pool, THRESHOLDS) == fused_pcmi_select(shifted, THRESHOLDS)

    def test_permutation_invariance_up_to_tiebreak(self):
        rng = random.Random(8)
        for _ in range(200):
            # continuous scores: no ties, so the choice must be identical
            n = rng.randint(1, 12)
            pool = make_pool(
                [rng.uniform(0, 200) for _ in range(n)],
                [rng.uniform(-5, 30) for _ in range(n)],
            )
            perm = list(range(len(pool)))
            rng.shuffle(perm)
            permuted = CandidatePool(pool.instance_id, [pool.candidates[j] for j in perm])
            index, trace = fused_pcmi_select(pool, THRESHOLDS)
            p_index, p_trace = fused_pcmi_select(permuted, THRESHOLDS)
            assert trace == p_trace
            # same bundle scores modulo tie-break
            assert permuted.bundle(p_index).pmi_hk == pool.bundle(index).pmi_hk
            assert permuted.bundle(p_index).pcmi_h == pool.bundle(index).pcmi_h


def test_selection_record_shape():
    pool = make_pool([87, 150], [14, 4], instance_id="i9")
    rec = selection_record(pool, "max_pmi", 1, "default")
    assert rec == {
        "instance_id": "i9",
        "method": "max_pmi",
        "selected_candidate_id": 1,
        "trace": "default",
        "pmi_hk": 150,
        "pcmi_h": 4,
        "pcmi_k": pool.bundle(1).pcmi_k,
    }
