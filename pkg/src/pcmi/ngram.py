"""Deterministic interpolated trigram oracle standing in for the fine-tuned LM.

One model is trained per context spec (FULL, H_ONLY, K_ONLY, NONE), mirroring
the ablation-model design: contexts excluded from a spec are dropped from the
training sequences, not merely masked at query time.

Training sequences are rendered as ``BOS <kept contexts, SEP-joined> SEP g
EOS``. End-of-sequence is kept in the vocabulary but excluded as an n-gram
prediction target, and unigram counts cover word tokens only (add-1 over the
full vocabulary including specials), so hand-computed probabilities stay
simple. Interpolation weights of unavailable orders fall back to the unigram
floor, keeping every conditional distribution normalized.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyCorpus, InvalidDistribution, SpecMismatch
from .text import BOS, EOS, SEP, SPECIALS, UNK, tokenize

DEFAULT_LAMBDAS = (0.6, 0.3, 0.1)


@dataclass(frozen=True)
class ContextSpec:
    use_history: bool
    use_knowledge: bool

    @property
    def name(self) -> str:
        return {
            (True, True): "FULL",
            (True, False): "H_ONLY",
            (False, True): "K_ONLY",
            (False, False): "NONE",
        }[(self.use_history, self.use_knowledge)]

    @classmethod
    def from_name(cls, name: str) -> "ContextSpec":
        try:
            return {
                "FULL": cls(True, True),
                "H_ONLY": cls(True, False),
                "K_ONLY": cls(False, True),
                "NONE": cls(False, False),
            }[name.upper()]
        except KeyError:
            raise SpecMismatch(f"unknown context spec {name!r}") from None


FULL = ContextSpec(True, True)
H_ONLY = ContextSpec(True, False)
K_ONLY = ContextSpec(False, True)
NONE = ContextSpec(False, False)
ALL_SPECS = (FULL, H_ONLY, K_ONLY, NONE)


def render_prefix_tokens(spec: ContextSpec, h_turns: list[str], k: str) -> list[str]:
    """Canonical prompt rendering shared by every backend.

    History turns oldest-first, then the fact, SEP-joined; a trailing SEP
    separates the contexts from the response.
    """
    segments: list[list[str]] = []
    if spec.use_history:
        segments.extend(tokenize(turn) for turn in h_turns)
    if spec.use_knowledge:
        segments.append(tokenize(k))
    tokens = [BOS]
    for segment in segments:
        tokens.extend(segment)
        tokens.append(SEP)
    return tokens


@dataclass
class _SparseRow:
    ids: np.ndarray
    counts: np.ndarray
    total: float


_EMPTY_IDS = np.empty(0, dtype=np.int64)
_EMPTY_COUNTS = np.empty(0, dtype=np.float64)
_EMPTY_ROW = _SparseRow(_EMPTY_IDS, _EMPTY_COUNTS, 0.0)


@dataclass
class NGramModel:
    """Immutable after training; safe to share across threads."""

    spec: ContextSpec
    vocab: dict[str, int]
    uni_probs: np.ndarray
    bigrams: dict[int, _SparseRow]
    trigrams: dict[tuple[int, int], _SparseRow]
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS
    id_to_token: list[str] = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def token_id(self, token: str) -> int:
        return self.vocab.get(token, self.vocab[UNK])


def _render_training_sequence(spec: ContextSpec, instance) -> list[str]:
    return render_prefix_tokens(spec, list(instance.h), instance.k) + tokenize(instance.g) + [EOS]


def ngram_train(corpus, spec: ContextSpec, lambdas=DEFAULT_LAMBDAS) -> NGramModel:
    """Train the interpolated trigram model for one context spec.

    ``corpus`` is any iterable of objects with ``h`` (list of turn texts),
    ``k`` and ``g`` string attributes.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("cannot train on an empty corpus")
    if abs(sum(lambdas) - 1.0) > 1e-9:
        raise InvalidDistribution(f"interpolation weights {lambdas} must sum to 1")

    sequences = [_render_training_sequence(spec, inst) for inst in corpus]

    vocab: dict[str, int] = {tok: i for i, tok in enumerate(SPECIALS)}
    for seq in sequences:
        for tok in seq:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    id_to_token = [None] * len(vocab)
    for tok, i in vocab.items():
        id_to_token[i] = tok
    special_ids = {vocab[s] for s in SPECIALS}

    uni_counts = np.zeros(len(vocab), dtype=np.float64)
    bi_acc: dict[int, dict[int, float]] = {}
    tri_acc: dict[tuple[int, int], dict[int, float]] = {}
    eos_id = vocab[EOS]
    for seq in sequences:
        ids = [vocab[t] for t in seq]
        for i, tid in enumerate(ids):
            if tid not in special_ids:
                uni_counts[tid] += 1.0
            if i == 0 or tid == eos_id:
                continue  # EOS excluded as a prediction target
            ctx1 = ids[i - 1]
            bi_acc.setdefault(ctx1, {})
            bi_acc[ctx1][tid] = bi_acc[ctx1].get(tid, 0.0) + 1.0
            if i >= 2:
                ctx2 = (ids[i - 2], ids[i - 1])
                tri_acc.setdefault(ctx2, {})
                tri_acc[ctx2][tid] = tri_acc[ctx2].get(tid, 0.0) + 1.0

    n_words = float(uni_counts.sum())
    uni_probs = (uni_counts + 1.0) / (n_words + len(vocab))

    def finalize(acc: dict) -> dict:
        out = {}
        for ctx, nexts in acc.items():
            items = sorted(nexts.items())
            ids_arr = np.array([i for i, _ in items], dtype=np.int64)
            counts_arr = np.array([c for _, c in items], dtype=np.float64)
            out[ctx] = _SparseRow(ids_arr, counts_arr, float(counts_arr.sum()))
        return out

    return NGramModel(
        spec=spec,
        vocab=vocab,
        uni_probs=uni_probs,
        bigrams=finalize(bi_acc),
        trigrams=finalize(tri_acc),
        lambdas=tuple(lambdas),
        id_to_token=id_to_token,
    )


def conditional_distribution(model: NGramModel, context_ids: tuple[int, int]) -> np.ndarray:
    """Dense next-token distribution given the two preceding token ids."""
    lam3, lam2, lam1 = model.lambdas
    tri = model.trigrams.get(context_ids, _EMPTY_ROW)
    bi = model.bigrams.get(context_ids[1], _EMPTY_ROW)
    return kernels.mix_distribution(
        model.uni_probs,
        bi.ids,
        bi.counts,
        bi.total,
        tri.ids,
        tri.counts,
        tri.total,
        lam3,
        lam2,
        lam1,
    )


def _token_prob(model: NGramModel, context_ids: tuple[int, int], tid: int) -> float:
    lam3, lam2, lam1 = model.lambdas
    tri = model.trigrams.get(context_ids, _EMPTY_ROW)
    bi = model.bigrams.get(context_ids[1], _EMPTY_ROW)
    w3 = lam3 if tri.total > 0 else 0.0
    w2 = lam2 if bi.total > 0 else 0.0
    w1 = 1.0 - w3 - w2
    p = w1 * model.uni_probs[tid]
    if w2 > 0:
        idx = np.searchsorted(bi.ids, tid)
        if idx < len(bi.ids) and bi.ids[idx] == tid:
            p += (w2 / bi.total) * bi.counts[idx]
    if w3 > 0:
        idx = np.searchsorted(tri.ids, tid)
        if idx < len(tri.ids) and tri.ids[idx] == tid:
            p += (w3 / tri.total) * tri.counts[idx]
    return float(p)


def ngram_score(
    model: NGramModel,
    spec: ContextSpec,
    h_turns: list[str],
    k: str,
    g_tokens: list[str],
) -> list[float]:
    """Per-token natural-log probabilities of g under the model's spec."""
    if spec != model.spec:
        raise SpecMismatch(f"model trained for {model.spec.name}, queried with {spec.name}")
    prefix_ids = [model.token_id(t) for t in render_prefix_tokens(spec, h_turns, k)]
    logps = []
    running = list(prefix_ids)
    for tok in g_tokens:
        tid = model.token_id(tok)
        ctx = (running[-2], running[-1]) if len(running) >= 2 else (model.vocab[BOS], running[-1])
        logps.append(float(np.log(_token_prob(model, ctx, tid))))
        running.append(tid)
    return logps


def nucleus_sample(distribution, top_p: float, temperature: float, rng) -> int:
    """Sample one index with temperature + top-p truncation.

    ``rng`` is a seed int or a numpy Generator; deterministic for a fixed
    seed (ties broken by lowest index).
    """
    probs = np.asarray(distribution, dtype=np.float64)
    if probs.ndim != 1 or len(probs) == 0 or (probs < 0).any():
        raise InvalidDistribution("distribution must be a non-negative 1-D vector")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise InvalidDistribution(f"distribution sums to {probs.sum()}, expected 1")
    if not 0.0 < top_p <= 1.0:
        raise InvalidDistribution(f"top_p must be in (0, 1], got {top_p}")
    if temperature <= 0:
        raise InvalidDistribution(f"temperature must be positive, got {temperature}")
    if not hasattr(rng, "random"):
        rng = np.random.default_rng(rng)
    return kernels.nucleus_pick(probs, float(top_p), float(temperature), float(rng.random()))


def ngram_sample(
    model: NGramModel,
    h_turns: list[str],
    k: str,
    n: int,
    top_p: float,
    temperature: float,
    max_tokens: int,
    seed: int,
) -> list[list[str]]:
    """Sample n candidate responses from the FULL-spec model."""
    rng = np.random.default_rng(seed)
    prefix_ids = [model.token_id(t) for t in render_prefix_tokens(model.spec, h_turns, k)]
    eos_id = model.vocab[EOS]
    samples = []
    for _ in range(n):
        running = list(prefix_ids)
        tokens: list[str] = []
        for _ in range(max_tokens):
            ctx = (running[-2], running[-1]) if len(running) >= 2 else (model.vocab[BOS], running[-1])
            dist = conditional_distribution(model, ctx)
            tid = kernels.nucleus_pick(dist, float(top_p), float(temperature), float(rng.random()))
            if tid == eos_id:
                break
            tokens.append(model.id_to_token[tid])
            running.append(tid)
        if not tokens:
            tokens = [UNK]
        samples.append(tokens)
    return samples
