"""Conversational-rephrasing instance construction from a Topical-Chat-style
corpus: TF-IDF matching of utterances to facts plus entity-disjoint splits."""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import InputMissing, InsufficientEntities
from .text import tokenize

logger = logging.getLogger(__name__)

DEFAULT_TFIDF_THRESHOLD = 0.12


@dataclass(frozen=True)
class Conversation:
    id: str
    entities: list[str]
    turns: list[tuple[str, str]]  # (speaker, text)


@dataclass(frozen=True)
class TilFact:
    id: str
    text: str
    entity: str


@dataclass(frozen=True)
class RephrasingInstance:
    id: str
    h: list[str]  # exactly the two turns preceding g, oldest first
    k: str
    g: str
    entity: str
    match_score: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RephrasingInstance":
        return cls(
            id=d["id"],
            h=list(d["h"]),
            k=d["k"],
            g=d["g"],
            entity=d["entity"],
            match_score=float(d["match_score"]),
        )


@dataclass
class CorpusStats:
    """Document frequencies over all utterances and facts."""

    n_docs: int
    df: dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, documents: list[str]) -> "CorpusStats":
        df: dict[str, int] = {}
        for doc in documents:
            for term in set(tokenize(doc)):
                df[term] = df.get(term, 0) + 1
        return cls(n_docs=len(documents), df=df)

    def idf(self, term: str) -> float:
        # smooth idf: ln((1+N)/(1+df)) + 1
        return math.log((1 + self.n_docs) / (1 + self.df.get(term, 0))) + 1.0


def _tfidf_vector(text: str, stats: CorpusStats) -> dict[str, float]:
    tf: dict[str, int] = {}
    for term in tokenize(text):
        tf[term] = tf.get(term, 0) + 1
    return {term: count * stats.idf(term) for term, count in tf.items()}


def tfidf_similarity(a: str, b: str, stats: CorpusStats) -> float:
    """Cosine similarity of raw-count tf * smooth-idf vectors, in [0, 1]."""
    va = _tfidf_vector(a, stats)
    vb = _tfidf_vector(b, stats)
    if not va or not vb:
        logger.warning("tfidf_similarity of empty text; returning 0")
        return 0.0
    dot = sum(w * vb[t] for t, w in va.items() if t in vb)
    norm_a = math.sqrt(sum(w * w for w in va.values()))
    norm_b = math.sqrt(sum(w * w for w in vb.values()))
    return dot / (norm_a * norm_b)


def extract_instances(
    conversations: list[Conversation],
    facts: list[TilFact],
    threshold: float = DEFAULT_TFIDF_THRESHOLD,
    stats: CorpusStats | None = None,
) -> list[RephrasingInstance]:
    """One instance per utterance whose best-matching fact clears the threshold.

    Candidate facts for a conversation are those sharing one of its entity
    labels. The two turns preceding the matched utterance become h.
    """
    if stats is None:
        documents = [text for conv in conversations for _, text in conv.turns]
        documents += [f.text for f in facts]
        stats = CorpusStats.build(documents)

    facts_by_entity: dict[str, list[TilFact]] = {}
    for fact in facts:
        facts_by_entity.setdefault(fact.entity, []).append(fact)

    instances = []
    for conv in conversations:
        candidates = [f for e in conv.entities for f in facts_by_entity.get(e, [])]
        if not candidates:
            continue
        for i in range(2, len(conv.turns)):
            g_text = conv.turns[i][1]
            best_fact, best_score = None, -1.0
            for fact in candidates:
                score = tfidf_similarity(g_text, fact.text, stats)
                if score > best_score:
                    best_fact, best_score = fact, score
            if best_fact is not None and best_score >= threshold:
                instances.append(
                    RephrasingInstance(
                        id=f"{conv.id}:{i}",
                        h=[conv.turns[i - 2][1], conv.turns[i - 1][1]],
                        k=best_fact.text,
                        g=g_text,
                        entity=best_fact.entity,
                        match_score=best_score,
                    )
                )
    return instances


def split_by_entity(
    instances: list[RephrasingInstance],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[RephrasingInstance], list[RephrasingInstance], list[RephrasingInstance]]:
    """Entity-disjoint train/validation/test split.

    Entities are shuffled with the seed, then greedily assigned to the
    partition with the largest remaining deficit against its target ratio.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InsufficientEntities(f"ratios {ratios} must sum to 1")
    by_entity: dict[str, list[RephrasingInstance]] = {}
    for inst in instances:
        by_entity.setdefault(inst.entity, []).append(inst)
    entities = sorted(by_entity)
    if len(entities) < 3:
        raise InsufficientEntities(f"need >= 3 entities, got {len(entities)}")
    random.Random(seed).shuffle(entities)

    total = len(instances)
    parts: list[list[RephrasingInstance]] = [[], [], []]
    counts = [0, 0, 0]
    for entity in entities:
        deficits = [ratios[j] - counts[j] / total for j in range(3)]
        j = max(range(3), key=lambda idx: (deficits[idx], -idx))
        parts[j].extend(by_entity[entity])
        counts[j] += len(by_entity[entity])
    return parts[0], parts[1], parts[2]


def load_topical_chat(conversations_path: str | Path, facts_path: str | Path) -> tuple[list[Conversation], list[TilFact]]:
    """Read Topical-Chat-style JSON inputs.

    Conversations: ``{conv_id: {"entities": [...], "content": [{"message",
    "agent"}, ...]}}``. Reading set: ``{entity: [fact, ...]}``.
    """
    conversations_path, facts_path = Path(conversations_path), Path(facts_path)
    for p in (conversations_path, facts_path):
        if not p.exists():
            raise InputMissing(f"input file not found: {p}")
    with conversations_path.open() as fh:
        raw_convs = json.load(fh)
    with facts_path.open() as fh:
        raw_facts = json.load(fh)

    conversations = [
        Conversation(
            id=conv_id,
            entities=list(body.get("entities", [])),
            turns=[(turn["agent"], turn["message"]) for turn in body["content"]],
        )
        for conv_id, body in raw_convs.items()
    ]
    facts = [
        TilFact(id=f"{entity}:{i}", text=text, entity=entity)
        for entity, texts in raw_facts.items()
        for i, text in enumerate(texts)
    ]
    return conversations, facts


def write_instances(instances: list[RephrasingInstance], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict()) + "\n")


def read_instances(path: str | Path) -> list[RephrasingInstance]:
    path = Path(path)
    if not path.exists():
        raise InputMissing(f"instances file not found: {path}")
    with path.open() as fh:
        return [RephrasingInstance.from_dict(json.loads(line)) for line in fh if line.strip()]
