"""Regenerates the bundled toy Topical-Chat-style corpus (seeded).

Usage: python scripts/make_toy_corpus.py [out_dir]
"""
import json
import random
import sys
from pathlib import Path

SEED = 13
N_ENTITIES = 18
FACTS_PER_ENTITY = 3
CONVS_PER_ENTITY = 3
TURNS_PER_CONV = 7

COMMON = (
    "i you we they that this it was is are very really quite just so such "
    "think know wonder heard read seen like love found interesting amazing "
    "strange funny cool wild true crazy never always often people time year "
    "world story fact thing way day good great"
).split()

OPENERS = [
    "hey have you heard about",
    "so i was reading about",
    "do you know much about",
    "what do you think of",
]

ACKS = [
    "wow that is really interesting",
    "i agree that sounds amazing",
    "no way i never knew that",
    "yes i have heard something like that before",
    "that reminds me of a story i read",
]

TOPICS = (
    "whales volcano chess jazz comets bridges coffee glaciers robots castles "
    "spiders pyramids tornado coral lighthouse meteors origami geysers"
).split()


def entity_words(rng, topic):
    # topic-specific content vocabulary
    suffixes = ["facts", "history", "records", "science", "legends", "experts", "museum", "archive"]
    return [topic] + [f"{topic[:4]}{s}" for s in rng.sample(suffixes, 5)]


def make_fact(rng, words):
    body = rng.sample(words, k=4) + rng.sample(COMMON, k=6)
    rng.shuffle(body)
    return f"the {words[0]} is known because " + " ".join(body)


def main(out_dir: Path) -> None:
    rng = random.Random(SEED)
    facts = {}
    conversations = {}
    for e in range(N_ENTITIES):
        topic = TOPICS[e]
        entity = f"entity_{topic}"
        words = entity_words(rng, topic)
        entity_facts = [make_fact(rng, words) for _ in range(FACTS_PER_ENTITY)]
        facts[entity] = entity_facts
        for c in range(CONVS_PER_ENTITY):
            turns = []
            turns.append(
                {"agent": "agent_1", "message": f"{rng.choice(OPENERS)} {topic}"}
            )
            turns.append(
                {
                    "agent": "agent_2",
                    "message": f"a little bit yes tell me more about {topic} "
                    + " ".join(rng.sample(COMMON, 4)),
                }
            )
            for t in range(2, TURNS_PER_CONV):
                speaker = f"agent_{1 + t % 2}"
                fact = rng.choice(entity_facts)
                fact_words = fact.split()
                # quote a contiguous chunk of the fact, conversationalized
                start = rng.randrange(0, max(1, len(fact_words) - 6))
                quoted = " ".join(fact_words[start : start + rng.randint(5, 9)])
                ack = rng.choice(ACKS)
                filler = " ".join(rng.sample(COMMON, rng.randint(2, 5)))
                if rng.random() < 0.5:
                    message = f"{ack} {quoted} {filler}"
                else:
                    message = f"{quoted} {filler} {ack}"
                turns.append({"agent": speaker, "message": message})
            conversations[f"conv_{entity}_{c}"] = {
                "entities": [entity],
                "content": turns,
            }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "toy_conversations.json").write_text(json.dumps(conversations, indent=1))
    (out_dir / "toy_facts.json").write_text(json.dumps(facts, indent=1))
    n_utt = sum(len(c["content"]) for c in conversations.values())
    print(f"wrote {len(conversations)} conversations ({n_utt} turns), "
          f"{sum(len(v) for v in facts.values())} facts -> {out_dir}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data")
