"""Sequence- and token-level PMI/PCMI scores from conditional log-probabilities.

All log-probabilities are natural logs (nats). Scores for one candidate g are
derived from four per-token series: log p(g|h,k), log p(g|h), log p(g|k) and
log p(g), each aligned to the same tokenization of g.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, asdict

from .errors import (
    DegenerateTotal,
    EmptySequence,
    InvalidSpan,
    LengthMismatch,
)


@dataclass(frozen=True)
class TokenizedText:
    tokens: list[str]
    token_ids: list[int]

    def __post_init__(self):
        if len(self.tokens) != len(self.token_ids):
            raise LengthMismatch(
                f"tokens ({len(self.tokens)}) and token_ids ({len(self.token_ids)}) differ"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class TokenScoreSeries:
    """Per-token log-probabilities of g under the four conditioning modes."""

    logp_full: list[float]
    logp_h: list[float]
    logp_k: list[float]
    logp_none: list[float]

    def __post_init__(self):
        lengths = {
            len(self.logp_full),
            len(self.logp_h),
            len(self.logp_k),
            len(self.logp_none),
        }
        if len(lengths) != 1:
            raise LengthMismatch(f"series lengths differ: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.logp_full)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TokenScoreSeries":
        return cls(
            logp_full=list(d["logp_full"]),
            logp_h=list(d["logp_h"]),
            logp_k=list(d["logp_k"]),
            logp_none=list(d["logp_none"]),
        )


@dataclass(frozen=True)
class ScoreBundle:
    """Sequence log-probabilities plus every derived PMI/PCMI quantity.

    Identities (exact up to float accumulation):
        pmi_hk = s_full - s_none
        pmi_h  = s_h - s_none
        pmi_k  = s_k - s_none
        pcmi_h = pmi_hk - pmi_k = s_full - s_k
        pcmi_k = pmi_hk - pmi_h = s_full - s_h
    """

    s_full: float
    s_h: float
    s_k: float
    s_none: float
    pmi_hk: float = field(init=False)
    pmi_h: float = field(init=False)
    pmi_k: float = field(init=False)
    pcmi_h: float = field(init=False)
    pcmi_k: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "pmi_hk", self.s_full - self.s_none)
        object.__setattr__(self, "pmi_h", self.s_h - self.s_none)
        object.__setattr__(self, "pmi_k", self.s_k - self.s_none)
        object.__setattr__(self, "pcmi_h", self.s_full - self.s_k)
        object.__setattr__(self, "pcmi_k", self.s_full - self.s_h)

    def to_dict(self) -> dict:
        return {
            "s_full": self.s_full,
            "s_h": self.s_h,
            "s_k": self.s_k,
            "s_none": self.s_none,
            "pmi_hk": self.pmi_hk,
            "pmi_h": self.pmi_h,
            "pmi_k": self.pmi_k,
            "pcmi_h": self.pcmi_h,
            "pcmi_k": self.pcmi_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreBundle":
        return cls(s_full=d["s_full"], s_h=d["s_h"], s_k=d["s_k"], s_none=d["s_none"])


@dataclass(frozen=True)
class SpanSet:
    """Non-overlapping, sorted half-open token intervals [start, end)."""

    spans: tuple[tuple[int, int], ...]

    def __init__(self, spans):
        spans = tuple((int(s), int(e)) for s, e in spans)
        prev_end = None
        for start, end in spans:
            if start < 0 or end <= start:
                raise InvalidSpan(f"bad span [{start}, {end})")
            if prev_end is not None and start < prev_end:
                raise InvalidSpan("spans overlap or are unsorted")
            prev_end = end
        object.__setattr__(self, "spans", spans)

    def validate_length(self, n_tokens: int) -> None:
        for start, end in self.spans:
            if end > n_tokens:
                raise InvalidSpan(f"span [{start}, {end}) exceeds length {n_tokens}")

    def covered_indices(self) -> list[int]:
        out: list[int] = []
        for start, end in self.spans:
            out.extend(range(start, end))
        return out

    def to_list(self) -> list[list[int]]:
        return [[s, e] for s, e in self.spans]


def derive_bundle(series: TokenScoreSeries) -> ScoreBundle:
    """Sum the four series and derive all PMI/PCMI scores."""
    if len(series) == 0:
        raise EmptySequence("cannot score an empty response")
    return ScoreBundle(
        s_full=sum(series.logp_full),
        s_h=sum(series.logp_h),
        s_k=sum(series.logp_k),
        s_none=sum(series.logp_none),
    )


def token_series(series: TokenScoreSeries) -> dict[str, list[float]]:
    """Token-wise PMI/PCMI decomposition.

    Returns lists ``pmi``, ``pcmi_h`` and ``pcmi_k``; each sums to the
    corresponding ScoreBundle scalar.
    """
    if len(series) == 0:
        raise EmptySequence("cannot decompose an empty response")
    pmi = [f - n for f, n in zip(series.logp_full, series.logp_none)]
    pcmi_h = [f - k for f, k in zip(series.logp_full, series.logp_k)]
    pcmi_k = [f - h for f, h in zip(series.logp_full, series.logp_h)]
    return {"pmi": pmi, "pcmi_h": pcmi_h, "pcmi_k": pcmi_k}


def attribution_ratio(
    token_scores: list[float],
    spans: SpanSet,
    positive_part: bool = False,
) -> float:
    """Share of a token-score series attributable to the given spans.

    With ``positive_part`` negative token scores are clipped to zero before
    summing (both numerator and denominator). Default uses raw signed scores.
    """
    spans.validate_length(len(token_scores))
    scores = [max(s, 0.0) for s in token_scores] if positive_part else list(token_scores)
    total = sum(scores)
    if abs(total) < 1e-12:
        raise DegenerateTotal(f"total token score {total} too close to zero")
    inside = sum(scores[i] for i in spans.covered_indices())
    return inside / total


TOKEN_CSV_HEADER = [
    "index",
    "token",
    "logp_full",
    "logp_h",
    "logp_k",
    "logp_none",
    "pmi",
    "pcmi_h",
    "pcmi_k",
]


def token_series_csv(g: TokenizedText, series: TokenScoreSeries) -> str:
    """Plot-ready CSV of per-token log-probs and PMI/PCMI decompositions."""
    if len(g) != len(series):
        raise LengthMismatch(
            f"response has {len(g)} tokens but series has {len(series)} entries"
        )
    decomp = token_series(series)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TOKEN_CSV_HEADER)
    for i, token in enumerate(g.tokens):
        writer.writerow(
            [
                i,
                token,
                series.logp_full[i],
                series.logp_h[i],
                series.logp_k[i],
                series.logp_none[i],
                decomp["pmi"][i],
                decomp["pcmi_h"][i],
                decomp["pcmi_k"][i],
            ]
        )
    return buf.getvalue()
