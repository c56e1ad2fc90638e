"""Word-level tokenization and reserved vocabulary symbols for the oracle."""
from __future__ import annotations

import re

BOS = "<bos>"
EOS = "<eos>"
SEP = "<sep>"
UNK = "<unk>"

SPECIALS = (UNK, BOS, EOS, SEP)

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; drops empty pieces."""
    return [t for t in _SPLIT.split(text.lower()) if t]


def token_offsets(text: str) -> list[tuple[str, int, int]]:
    """Tokens with their [start, end) character offsets in the original text.

    The lowercase of each slice equals the token produced by ``tokenize``.
    """
    out = []
    lowered = text.lower()
    pos = 0
    for token in tokenize(text):
        start = lowered.index(token, pos)
        end = start + len(token)
        out.append((text[start:end], start, end))
        pos = end
    return out
