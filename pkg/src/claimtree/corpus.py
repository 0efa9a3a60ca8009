"""Local document corpus with a persisted inverted index.

Corpus input is JSONL, one ``{id, title, body, tier}`` object per line.
Search is lexical: documents sharing at least one content word with the
query are ranked by (distinct matched tokens, total matched occurrences,
id) so results are deterministic for a fixed corpus.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

from .errors import DuplicateIdError, InvalidInputError, SchemaVersionError
from .textutils import STOP_WORDS, tokenize

INDEX_SCHEMA_VERSION = "1"


class SourceTier(IntEnum):
    """Ordinal credibility class; lower numbers are more trusted."""

    PEER_REVIEWED = 0
    TEXTBOOK = 1
    ENCYCLOPEDIA = 2
    GENERAL_WEB = 3
    UNKNOWN = 4


_TIER_NAMES = {tier.name.lower(): tier for tier in SourceTier}


def parse_tier(value) -> SourceTier:
    """Accept a tier as an integer (0-4) or a name like ``textbook``."""
    if isinstance(value, SourceTier):
        return value
    if isinstance(value, bool):
        raise InvalidInputError(f"invalid tier {value!r}")
    if isinstance(value, int):
        try:
            return SourceTier(value)
        except ValueError:
            raise InvalidInputError(f"invalid tier number {value}") from None
    if isinstance(value, str) and value.lower() in _TIER_NAMES:
        return _TIER_NAMES[value.lower()]
    raise InvalidInputError(f"invalid tier {value!r}")


@dataclass
class CorpusDocument:
    id: str
    title: str
    body: str
    tier: SourceTier = SourceTier.UNKNOWN
    uri: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "tier": self.tier.name.lower(),
            "uri": self.uri,
        }


def _doc_terms(doc: CorpusDocument) -> Counter:
    terms = Counter(tokenize(doc.title + " " + doc.body))
    for stop in STOP_WORDS:
        terms.pop(stop, None)
    return terms


class CorpusIndex:
    """Inverted index over a fixed document set; read-only after build."""

    def __init__(self) -> None:
        self.documents: dict[str, CorpusDocument] = {}
        self.postings: dict[str, dict[str, int]] = {}

    @classmethod
    def build(cls, documents: list[CorpusDocument]) -> "CorpusIndex":
        index = cls()
        for doc in documents:
            if not doc.id:
                raise InvalidInputError("document id must be non-empty")
            if doc.id in index.documents:
                raise DuplicateIdError(f"duplicate document id {doc.id!r}")
            index.documents[doc.id] = doc
            for term, count in _doc_terms(doc).items():
                index.postings.setdefault(term, {})[doc.id] = count
        return index

    def search(self, query: str, limit: int | None = None) -> list[CorpusDocument]:
        """Documents containing at least one query content word, best first."""
        terms = [t for t in tokenize(query) if t not in STOP_WORDS]
        matched: dict[str, tuple[int, int]] = {}
        for term in set(terms):
            for doc_id, count in self.postings.get(term, {}).items():
                distinct, total = matched.get(doc_id, (0, 0))
                matched[doc_id] = (distinct + 1, total + count)
        ranked = sorted(
            matched.items(), key=lambda item: (-item[1][0], -item[1][1], item[0])
        )
        docs = [self.documents[doc_id] for doc_id, _ in ranked]
        return docs[:limit] if limit is not None else docs

    def save(self, path: str | Path) -> None:
        data = {
            "schema_version": INDEX_SCHEMA_VERSION,
            "documents": {doc_id: doc.to_dict() for doc_id, doc in self.documents.items()},
            "postings": self.postings,
        }
        text = json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False)
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusIndex":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        version = data.get("schema_version")
        if version != INDEX_SCHEMA_VERSION:
            raise SchemaVersionError(
                f"unsupported index schema version {version!r}, "
                f"expected {INDEX_SCHEMA_VERSION!r}"
            )
        index = cls()
        for doc_id, doc in data["documents"].items():
            index.documents[doc_id] = CorpusDocument(
                id=doc["id"],
                title=doc["title"],
                body=doc["body"],
                tier=parse_tier(doc["tier"]),
                uri=doc.get("uri"),
            )
        index.postings = {
            term: {doc_id: int(count) for doc_id, count in posting.items()}
            for term, posting in data["postings"].items()
        }
        return index


def index_corpus(documents: list[CorpusDocument], path: str | Path) -> CorpusIndex:
    """Build an index over the documents and persist it to ``path``."""
    index = CorpusIndex.build(documents)
    index.save(path)
    return index


def load_corpus_jsonl(path: str | Path) -> list[CorpusDocument]:
    """Read corpus documents from JSONL with fields id, title, body, tier."""
    documents = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            documents.append(
                CorpusDocument(
                    id=str(record["id"]),
                    title=record.get("title", ""),
                    body=record["body"],
                    tier=parse_tier(record.get("tier", "unknown")),
                    uri=record.get("uri"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise InvalidInputError(f"bad corpus record on line {line_no}: {err}") from err
    return documents
