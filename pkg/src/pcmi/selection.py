"""Candidate selection: Max-PMI, Fused-PCMI, and threshold calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPool, IndexOutOfRange, InsufficientData
from .scoring import ScoreBundle, TokenizedText


@dataclass(frozen=True)
class ThresholdConfig:
    """pcmi_h low/high cutoffs plus the PMI acceptability fraction.

    Shipped defaults (5, 14, 0.5) are the published calibration for the
    original fine-tuned models; recalibrate with ``calibrate_thresholds``
    for any other backend.
    """

    pcmi_h_low: float = 5.0
    pcmi_h_high: float = 14.0
    pmi_acceptable_fraction: float = 0.5

    def __post_init__(self):
        if self.pcmi_h_low > self.pcmi_h_high:
            raise InsufficientData(
                f"low threshold {self.pcmi_h_low} exceeds high {self.pcmi_h_high}"
            )
        if not 0.0 < self.pmi_acceptable_fraction <= 1.0:
            raise InsufficientData(
                f"pmi_acceptable_fraction must be in (0, 1], got {self.pmi_acceptable_fraction}"
            )


@dataclass
class CandidatePool:
    instance_id: str
    candidates: list[tuple[TokenizedText, ScoreBundle]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)

    def bundle(self, index: int) -> ScoreBundle:
        return self.candidates[index][1]

    def pmi_values(self) -> list[float]:
        return [b.pmi_hk for _, b in self.candidates]

    def pcmi_h_values(self) -> list[float]:
        return [b.pcmi_h for _, b in self.candidates]


def max_pmi_select(pool: CandidatePool) -> int:
    """Index of the maximal pmi_hk candidate; ties go to the lowest index."""
    if len(pool) == 0:
        raise EmptyPool(f"pool {pool.instance_id} has no candidates")
    values = pool.pmi_values()
    return values.index(max(values))


def calibrate_thresholds(
    validation_bundles: list[ScoreBundle],
    pmi_acceptable_fraction: float = 0.5,
) -> ThresholdConfig:
    """Q1/Q3 of validation pcmi_h (linear-interpolation quantiles)."""
    if len(validation_bundles) < 4:
        raise InsufficientData(
            f"need at least 4 bundles to calibrate, got {len(validation_bundles)}"
        )
    values = np.array([b.pcmi_h for b in validation_bundles], dtype=np.float64)
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return ThresholdConfig(
        pcmi_h_low=float(q1),
        pcmi_h_high=float(q3),
        pmi_acceptable_fraction=pmi_acceptable_fraction,
    )


def _pmi_rank(pool: CandidatePool, index: int) -> int:
    # 1-based descending rank; ties broken by lower index ranking first.
    values = pool.pmi_values()
    target = values[index]
    rank = 1
    for i, v in enumerate(values):
        if v > target or (v == target and i < index):
            rank += 1
    return rank


def pmi_acceptable(pool: CandidatePool, index: int, fraction: float = 0.5) -> bool:
    """True iff the candidate's pmi_hk rank is within the top fraction."""
    if not 0 <= index < len(pool):
        raise IndexOutOfRange(f"index {index} outside pool of size {len(pool)}")
    cutoff = math.ceil(len(pool) * fraction)
    return _pmi_rank(pool, index) <= cutoff


def fused_pcmi_select(
    pool: CandidatePool,
    thresholds: ThresholdConfig,
) -> tuple[int, str]:
    """Swap a low-pcmi_h Max-PMI pick for a high-pcmi_h, PMI-acceptable one.

    Returns (index, trace) with trace in {"default", "swapped", "fallback"}:
    "default" when the Max-PMI candidate is not low on pcmi_h, "swapped"
    when a qualifying alternative exists (maximal pmi_hk among them),
    "fallback" when none does.
    """
    m = max_pmi_select(pool)
    if pool.bundle(m).pcmi_h >= thresholds.pcmi_h_low:
        return m, "default"
    alternatives = [
        i
        for i in range(len(pool))
        if pool.bundle(i).pcmi_h >= thresholds.pcmi_h_high
        and pmi_acceptable(pool, i, thresholds.pmi_acceptable_fraction)
    ]
    if not alternatives:
        return m, "fallback"
    best = max(alternatives, key=lambda i: (pool.bundle(i).pmi_hk, -i))
    return best, "swapped"


def selection_record(pool: CandidatePool, method: str, index: int, trace: str) -> dict:
    """JSONL export row for one selection decision."""
    bundle = pool.bundle(index)
    return {
        "instance_id": pool.instance_id,
        "method": method,
        "selected_candidate_id": index,
        "trace": trace,
        "pmi_hk": bundle.pmi_hk,
        "pcmi_h": bundle.pcmi_h,
        "pcmi_k": bundle.pcmi_k,
    }
