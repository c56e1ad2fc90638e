"""Comparison-pair construction, annotation aggregation, and statistics.

Three experiment designs:
  EXP1: Max-PMI candidate vs a seeded-random other candidate.
  EXP2: within-instance pair with |delta pcmi_h| above a cutoff and minimal
        |delta pcmi_k|; annotators also mark an acknowledgement span.
  EXP3: Max-PMI vs Fused-PCMI, only where the two differ.

Each pair carries a hidden hypothesis side; presentation order (A/B) is
randomized with a seed and recorded.
"""
from __future__ import annotations

import logging
import math
import random
import statistics
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (
    EmptyGroup,
    InvalidCounts,
    NoSpans,
    PoolTooSmall,
    WrongAnnotationCount,
)
from .scoring import ScoreBundle, SpanSet, TokenScoreSeries, attribution_ratio, token_series
from .selection import CandidatePool, ThresholdConfig, fused_pcmi_select, max_pmi_select, pmi_acceptable

logger = logging.getLogger(__name__)

CHOICES = ("A", "B", "BOTH_NONSENSICAL")
RATERS_PER_PAIR = 3


@dataclass(frozen=True)
class ComparisonPair:
    pair_id: str
    instance_id: str
    experiment: str  # EXP1, EXP2, EXP3
    side_a: int  # candidate index within the instance's pool
    side_b: int
    hypothesis_side: str  # "A" or "B"; which side the tested method produced
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonPair":
        return cls(
            pair_id=d["pair_id"],
            instance_id=d["instance_id"],
            experiment=d["experiment"],
            side_a=int(d["side_a"]),
            side_b=int(d["side_b"]),
            hypothesis_side=d["hypothesis_side"],
            metadata=dict(d.get("metadata", {})),
        )


@dataclass(frozen=True)
class Annotation:
    pair_id: str
    annotator_id: str
    choice: str  # A, B, BOTH_NONSENSICAL
    spans: dict | None = None  # {"A"|"B": [[start, end), ...]}, EXP2 only
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(
            pair_id=d["pair_id"],
            annotator_id=d["annotator_id"],
            choice=d["choice"],
            spans=d.get("spans"),
            timestamp=float(d.get("timestamp", 0.0)),
        )


@dataclass(frozen=True)
class AggregateResult:
    experiment: str
    n: int  # pairs with a choice majority
    K: int  # pairs whose majority favors the hypothesis side
    p_value: float
    kappa: float

    def to_dict(self) -> dict:
        return {
            "exp": self.experiment,
            "n": self.n,
            "K": self.K,
            "p": self.p_value,
            "kappa": self.kappa,
        }


def _place_sides(rng: random.Random, hypothesis_idx: int, other_idx: int) -> tuple[int, int, str]:
    if rng.random() < 0.5:
        return hypothesis_idx, other_idx, "A"
    return other_idx, hypothesis_idx, "B"


def build_exp1_pairs(pools: list[CandidatePool], seed: int = 0) -> list[ComparisonPair]:
    """Max-PMI vs a random other candidate, one pair per instance.

    Metadata records whether the random opponent sat in the top or bottom
    50% of the pool by PMI rank (the stratified EXP1_TOP / EXP1_BOTTOM
    analysis).
    """
    rng = random.Random(seed)
    pairs = []
    for pool in pools:
        if len(pool) < 2:
            raise PoolTooSmall(f"pool {pool.instance_id} has {len(pool)} candidates, need >= 2")
        m = max_pmi_select(pool)
        opponent = rng.choice([i for i in range(len(pool)) if i != m])
        stratum = "top" if pmi_acceptable(pool, opponent, 0.5) else "bottom"
        side_a, side_b, hyp = _place_sides(rng, m, opponent)
        pairs.append(
            ComparisonPair(
                pair_id=f"exp1:{pool.instance_id}",
                instance_id=pool.instance_id,
                experiment="EXP1",
                side_a=side_a,
                side_b=side_b,
                hypothesis_side=hyp,
                metadata={"opponent_stratum": stratum, "max_pmi_index": m},
            )
        )
    return pairs


def build_exp2_pairs(
    pools: list[CandidatePool],
    delta_h_min: float = 15.0,
    seed: int = 0,
) -> tuple[list[ComparisonPair], float | None]:
    """High vs low pcmi_h pair per instance, controlling pcmi_k.

    Among unordered candidate pairs with |delta pcmi_h| > delta_h_min,
    selects the one minimizing |delta pcmi_k|; instances with no qualifying
    pair are skipped. Returns the pairs plus the median |delta pcmi_k|.
    """
    rng = random.Random(seed)
    pairs = []
    delta_ks = []
    for pool in pools:
        best = None
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                dh = abs(pool.bundle(i).pcmi_h - pool.bundle(j).pcmi_h)
                if dh <= delta_h_min:
                    continue
                dk = abs(pool.bundle(i).pcmi_k - pool.bundle(j).pcmi_k)
                if best is None or dk < best[0]:
                    best = (dk, dh, i, j)
        if best is None:
            continue
        dk, dh, i, j = best
        high = i if pool.bundle(i).pcmi_h > pool.bundle(j).pcmi_h else j
        low = j if high == i else i
        side_a, side_b, hyp = _place_sides(rng, high, low)
        delta_ks.append(dk)
        pairs.append(
            ComparisonPair(
                pair_id=f"exp2:{pool.instance_id}",
                instance_id=pool.instance_id,
                experiment="EXP2",
                side_a=side_a,
                side_b=side_b,
                hypothesis_side=hyp,
                metadata={"delta_pcmi_h": dh, "delta_pcmi_k": dk},
            )
        )
    median_dk = statistics.median(delta_ks) if delta_ks else None
    return pairs, median_dk


def build_exp3_pairs(
    pools: list[CandidatePool],
    thresholds: ThresholdConfig,
    seed: int = 0,
) -> list[ComparisonPair]:
    """Max-PMI vs Fused-PCMI, emitted only when the swap rule fired."""
    rng = random.Random(seed)
    pairs = []
    for pool in pools:
        m = max_pmi_select(pool)
        fused, trace = fused_pcmi_select(pool, thresholds)
        if trace != "swapped":
            continue
        side_a, side_b, hyp = _place_sides(rng, fused, m)
        pairs.append(
            ComparisonPair(
                pair_id=f"exp3:{pool.instance_id}",
                instance_id=pool.instance_id,
                experiment="EXP3",
                side_a=side_a,
                side_b=side_b,
                hypothesis_side=hyp,
                metadata={"max_pmi_index": m, "fused_index": fused, "trace": trace},
            )
        )
    return pairs


def majority_vote(annotations: list[Annotation]) -> str:
    """Majority over exactly three annotations.

    Returns "A"/"B" on a choice majority, "NONSENSICAL" when the majority
    marked both candidates nonsensical, "NO_MAJORITY" otherwise.
    """
    if len(annotations) != RATERS_PER_PAIR:
        raise WrongAnnotationCount(
            f"need exactly {RATERS_PER_PAIR} annotations, got {len(annotations)}"
        )
    counts = {c: 0 for c in CHOICES}
    for ann in annotations:
        if ann.choice not in counts:
            raise WrongAnnotationCount(f"unknown choice {ann.choice!r}")
        counts[ann.choice] += 1
    for choice in ("A", "B"):
        if counts[choice] >= 2:
            return choice
    if counts["BOTH_NONSENSICAL"] >= 2:
        return "NONSENSICAL"
    return "NO_MAJORITY"


def binomial_test(n: int, K: int) -> float:
    """Exact one-sided tail P(X >= K) for X ~ Binomial(n, 1/2), log-space."""
    if not 0 <= K <= n:
        raise InvalidCounts(f"require 0 <= K <= n, got K={K}, n={n}")
    if n == 0:
        return 1.0
    log_half = n * math.log(0.5)
    terms = [
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) + log_half
        for k in range(K, n + 1)
    ]
    m = max(terms)
    return math.exp(m) * sum(math.exp(t - m) for t in terms)


def fleiss_kappa(table: list[list[int]]) -> float:
    """Fleiss kappa for a subjects x categories count table (equal raters).

    Returns 1.0 with a warning when expected agreement is 1 (all raters used
    a single category everywhere), where the formula is undefined.
    """
    arr = np.asarray(table, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise WrongAnnotationCount("table must be a non-empty 2-D count matrix")
    raters = arr.sum(axis=1)
    if not np.all(raters == raters[0]) or raters[0] < 2:
        raise WrongAnnotationCount("every subject must have the same rater count >= 2")
    n = raters[0]
    p_i = ((arr**2).sum(axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = arr.sum(axis=0) / arr.sum()
    p_e = float((p_j**2).sum())
    if abs(1.0 - p_e) < 1e-12:
        logger.warning("degenerate agreement (all raters one category); kappa := 1.0")
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


def aggregate(
    pairs: list[ComparisonPair],
    annotations: list[Annotation],
) -> list[AggregateResult]:
    """Fold an annotation log into one Table-shaped row per experiment.

    n counts pairs with a choice majority; nonsensical-majority and
    no-majority pairs are excluded. kappa is computed over all fully
    annotated pairs of the experiment.
    """
    by_pair: dict[str, list[Annotation]] = {}
    for ann in annotations:
        by_pair.setdefault(ann.pair_id, []).append(ann)

    results = []
    for experiment in sorted({p.experiment for p in pairs}):
        n = K = 0
        table = []
        for pair in pairs:
            if pair.experiment != experiment:
                continue
            anns = by_pair.get(pair.pair_id, [])
            if len(anns) != RATERS_PER_PAIR:
                continue
            counts = [sum(1 for a in anns if a.choice == c) for c in CHOICES]
            table.append(counts)
            verdict = majority_vote(anns)
            if verdict in ("A", "B"):
                n += 1
                if verdict == pair.hypothesis_side:
                    K += 1
        if not table:
            continue
        results.append(
            AggregateResult(
                experiment=experiment,
                n=n,
                K=K,
                p_value=binomial_test(n, K),
                kappa=fleiss_kappa(table),
            )
        )
    return results


def distribution_summary(
    groups: dict[str, list[ScoreBundle]],
    bins: int = 50,
) -> dict:
    """Quartile table and 2-D histograms over (pcmi_k, pcmi_h) per group.

    Histogram bin edges are shared across groups (global data range) so the
    grids are directly comparable.
    """
    for name, bundles in groups.items():
        if not bundles:
            raise EmptyGroup(f"group {name!r} is empty")
    all_h = [b.pcmi_h for bundles in groups.values() for b in bundles]
    all_k = [b.pcmi_k for bundles in groups.values() for b in bundles]
    k_range = (min(all_k), max(all_k) if max(all_k) > min(all_k) else min(all_k) + 1.0)
    h_range = (min(all_h), max(all_h) if max(all_h) > min(all_h) else min(all_h) + 1.0)

    def five_points(values: list[float]) -> dict:
        q = np.percentile(np.asarray(values, dtype=np.float64), [0, 25, 50, 75, 100])
        return {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]}

    out: dict = {"quartiles": {}, "histograms": {}, "bins": bins, "k_range": k_range, "h_range": h_range}
    for name, bundles in groups.items():
        h_vals = [b.pcmi_h for b in bundles]
        k_vals = [b.pcmi_k for b in bundles]
        out["quartiles"][name] = {"pcmi_h": five_points(h_vals), "pcmi_k": five_points(k_vals)}
        hist, _, _ = np.histogram2d(k_vals, h_vals, bins=bins, range=[k_range, h_range])
        out["histograms"][name] = hist
    return out


def attribution_report(
    records: list[tuple[TokenScoreSeries, SpanSet]],
    positive_part: bool = False,
) -> dict[str, float]:
    """Mean span-attribution ratio per score type over annotated responses.

    Score types: token-level pcmi_h, pmi(g;h) (logp_h - logp_none) and
    pcmi_k. Responses with a degenerate total are skipped with a warning.
    """
    if not records:
        raise NoSpans("no annotated spans to attribute")
    sums = {"pcmi_h": [], "pmi_h": [], "pcmi_k": []}
    for series, spans in records:
        decomp = token_series(series)
        pmi_h_t = [h - n for h, n in zip(series.logp_h, series.logp_none)]
        for name, scores in (
            ("pcmi_h", decomp["pcmi_h"]),
            ("pmi_h", pmi_h_t),
            ("pcmi_k", decomp["pcmi_k"]),
        ):
            try:
                sums[name].append(attribution_ratio(scores, spans, positive_part=positive_part))
            except Exception as exc:  # degenerate totals only
                logger.warning("skipping %s attribution: %s", name, exc)
    if not any(sums.values()):
        raise NoSpans("all attribution ratios were degenerate")
    return {name: float(np.mean(vals)) if vals else float("nan") for name, vals in sums.items()}


def majority_rate(q: float) -> float:
    """P(2-of-3 raters favor the hypothesis side | per-rater rate q)."""
    return q**3 + 3 * q**2 * (1 - q)


def simulate_annotations(
    pairs: list[ComparisonPair],
    preference_rate: float,
    seed: int = 0,
    annotator_pool: int = 9,
) -> list[Annotation]:
    """Synthetic 3-rater annotations with a planted per-rater preference."""
    rng = random.Random(seed)
    annotations = []
    for pair in pairs:
        raters = rng.sample(range(annotator_pool), RATERS_PER_PAIR)
        other = "B" if pair.hypothesis_side == "A" else "A"
        for rater in raters:
            choice = pair.hypothesis_side if rng.random() < preference_rate else other
            annotations.append(
                Annotation(pair_id=pair.pair_id, annotator_id=f"sim-{rater}", choice=choice)
            )
    return annotations
