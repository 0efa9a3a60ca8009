"""Small text helpers used by search scoring, deduplication, and matching."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"\w+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

# Fixed stop-word list; changing it changes relevance scores, so it is frozen.
STOP_WORDS = frozenset(
    """
    a about above after again all am an and any are as at be because been
    before being below between both but by can did do does doing down during
    each few for from further had has have having he her here hers him his
    how i if in into is it its itself just me more most my no nor not of off
    on once only or other our out over own same she should so some such than
    that the their them then there these they this those through to too under
    until up very was we were what when where which while who whom why will
    with you your
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def content_words(text: str) -> set[str]:
    """Distinct lowercased tokens with stop words removed."""
    return {tok for tok in tokenize(text) if tok not in STOP_WORDS}


def normalize_text(text: str) -> str:
    """Casefold and collapse whitespace; used as a deduplication key."""
    return " ".join(text.casefold().split())


def split_sentences(text: str) -> list[str]:
    """Naive sentence split on terminal punctuation followed by whitespace."""
    parts = _SENTENCE_SPLIT_RE.split(text.strip())
    return [p.strip() for p in parts if p.strip()]


def normalize_sentence(sentence: str) -> str:
    """Normalized sentence with trailing terminal punctuation stripped."""
    return normalize_text(sentence).rstrip(".!?").strip()
