"""Benchmark curation: extract claims, falsify a chosen few, pair the texts.

Each curated record holds a paraphrase that keeps every claim factually
intact (``factual_text``) and an alternative version that weaves in the
falsified claim (``falsified_text``). Falsification operators are typed so
errors can be analyzed per perturbation kind. All randomness is drawn from
a per-record seed, so curation is a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .backend import Backend, PromptRole
from .errors import (
    CurationCheckError,
    ExtractionFailedError,
    InapplicableOperatorError,
    InvalidInputError,
)
from .textutils import normalize_sentence, normalize_text, split_sentences

logger = logging.getLogger(__name__)

NUMERIC_FACTORS = ("0.1", "0.5", "2", "10")

SENTENCE_COUNT_SOFT_RANGE = (5, 60)


class Category(str, Enum):
    PATHOPHYSIOLOGY = "pathophysiology"
    MEDICATION = "medication"
    DIAGNOSIS = "diagnosis"
    SYMPTOM = "symptom"
    TREATMENT = "treatment"
    PREVENTION = "prevention"


class PerturbationOperator(str, Enum):
    NEGATION = "negation"
    ENTITY_SUBSTITUTION = "entity_substitution"
    NUMERIC_PERTURBATION = "numeric_perturbation"
    CAUSAL_REVERSAL = "causal_reversal"


@dataclass
class PerturbationMeta:
    operator: PerturbationOperator
    original_claim: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.value,
            "original_claim": self.original_claim,
            "seed": self.seed,
        }


@dataclass
class LabeledClaim:
    text: str
    label: str  # "factual" | "falsified"
    perturbation: PerturbationMeta | None = None

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "label": self.label,
            "perturbation": self.perturbation.to_dict() if self.perturbation else None,
        }


@dataclass
class BenchRecord:
    id: str
    category: Category
    source_text: str
    factual_text: str
    falsified_text: str
    claims: list[LabeledClaim] = field(default_factory=list)

    def falsified_claims(self) -> list[LabeledClaim]:
        return [c for c in self.claims if c.label == "falsified"]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.value,
            "source_text": self.source_text,
            "factual_text": self.factual_text,
            "falsified_text": self.falsified_text,
            "claims": [c.to_dict() for c in self.claims],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BenchRecord":
        claims = []
        for c in data["claims"]:
            meta = c.get("perturbation")
            claims.append(
                LabeledClaim(
                    text=c["text"],
                    label=c["label"],
                    perturbation=PerturbationMeta(
                        operator=PerturbationOperator(meta["operator"]),
                        original_claim=meta["original_claim"],
                        seed=meta["seed"],
                    )
                    if meta
                    else None,
                )
            )
        return cls(
            id=data["id"],
            category=Category(data["category"]),
            source_text=data["source_text"],
            factual_text=data["factual_text"],
            falsified_text=data["falsified_text"],
            claims=claims,
        )


def load_ontology(path: str | Path | None = None) -> dict[str, list[str]]:
    """Entity lists by type, used by the entity-substitution operator."""
    if path is None:
        text = resources.files("claimtree").joinpath("data/ontology.json").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


_NUMERAL_RE = re.compile(r"\d+(?:\.\d+)?")

_CAUSAL_CONNECTIVES = (
    "is caused by",
    "leads to",
    "lead to",
    "results in",
    "result in",
    "causes",
    "cause",
)

_AUX_NEGATIONS = {
    "is": "is not",
    "are": "are not",
    "was": "was not",
    "were": "were not",
    "can": "cannot",
    "will": "will not",
    "may": "may not",
    "must": "must not",
    "should": "should not",
    "does": "does not",
    "do": "do not",
    "has": "does not have",
    "have": "do not have",
}


def _third_person_lemma(verb: str) -> str | None:
    if re.fullmatch(r"[a-z]+ies", verb):
        return verb[:-3] + "y"
    if re.fullmatch(r"[a-z]+(ches|shes|sses|xes|zes)", verb):
        return verb[:-2]
    if re.fullmatch(r"[a-z]+s", verb) and not verb.endswith("ss"):
        return verb[:-1]
    return None


def _negate(claim: str) -> str:
    for aux, negated in _AUX_NEGATIONS.items():
        pattern = re.compile(rf"\b{aux}\b")
        match = pattern.search(claim)
        if match:
            return claim[: match.start()] + negated + claim[match.end() :]
    words = claim.split()
    for i, word in enumerate(words[1:], start=1):
        lemma = _third_person_lemma(word.lower())
        if lemma:
            words[i] = "does not " + lemma
            return " ".join(words)
    body = claim[0].lower() + claim[1:] if claim else claim
    return "It is not the case that " + body


def _find_entities(claim: str, ontology: dict[str, list[str]]) -> list[tuple[str, str]]:
    found = []
    lowered = claim.lower()
    for etype, entities in ontology.items():
        for entity in entities:
            if re.search(rf"\b{re.escape(entity.lower())}\b", lowered):
                found.append((etype, entity))
    return found


def _substitute_entity(claim: str, rng: random.Random, ontology: dict) -> str:
    found = _find_entities(claim, ontology)
    if not found:
        raise InapplicableOperatorError("no known entity found in claim")
    etype, entity = max(found, key=lambda item: len(item[1]))
    candidates = [e for e in ontology[etype] if e.lower() != entity.lower()]
    if not candidates:
        raise InapplicableOperatorError(f"no alternative entity of type {etype!r}")
    replacement = rng.choice(candidates)
    return re.sub(rf"\b{re.escape(entity)}\b", replacement, claim, count=1, flags=re.IGNORECASE)


def _perturb_numeral(claim: str, rng: random.Random) -> str:
    match = None
    for candidate in _NUMERAL_RE.finditer(claim):
        if float(candidate.group()) != 0:
            match = candidate
            break
    if match is None:
        raise InapplicableOperatorError("claim contains no nonzero numeral")
    factor = rng.choice(NUMERIC_FACTORS)
    value = Fraction(match.group()) * Fraction(factor)
    rendered = str(value.numerator) if value.denominator == 1 else str(float(value))
    return claim[: match.start()] + rendered + claim[match.end() :]


def _reverse_causal(claim: str) -> str:
    stripped = claim.rstrip(".")
    trailer = claim[len(stripped) :]
    for connective in _CAUSAL_CONNECTIVES:
        pattern = re.compile(rf"\s\b{connective}\b\s", flags=re.IGNORECASE)
        match = pattern.search(stripped)
        if not match:
            continue
        left = stripped[: match.start()].strip()
        right = stripped[match.end() :].strip()
        if not left or not right:
            continue
        new_left = right[0].upper() + right[1:]
        new_right = left[0].lower() + left[1:]
        return f"{new_left} {match.group().strip()} {new_right}{trailer}"
    raise InapplicableOperatorError("claim has no causal connective to reverse")


def applicable_operators(
    claim: str, ontology: dict[str, list[str]] | None = None
) -> list[PerturbationOperator]:
    """Operators that can perturb this claim; negation always applies."""
    ontology = ontology if ontology is not None else load_ontology()
    ops = [PerturbationOperator.NEGATION]
    if _find_entities(claim, ontology):
        ops.append(PerturbationOperator.ENTITY_SUBSTITUTION)
    if any(float(m.group()) != 0 for m in _NUMERAL_RE.finditer(claim)):
        ops.append(PerturbationOperator.NUMERIC_PERTURBATION)
    try:
        _reverse_causal(claim)
        ops.append(PerturbationOperator.CAUSAL_REVERSAL)
    except InapplicableOperatorError:
        pass
    return ops


def falsify(
    claim: str,
    operator: PerturbationOperator,
    seed: int,
    ontology: dict[str, list[str]] | None = None,
) -> tuple[str, PerturbationMeta]:
    """Apply one typed perturbation; output always differs from the input.

    Negation and causal reversal are template-based and backend-free.
    Entity substitution draws a same-type entity from the bundled ontology.
    Numeric perturbation multiplies the first nonzero numeral by a factor
    drawn from {0.1, 0.5, 2, 10} with ``random.Random(seed).choice``.
    """
    if not claim or not claim.strip():
        raise InvalidInputError("claim must be non-empty")
    rng = random.Random(seed)
    operator = PerturbationOperator(operator)
    if operator is PerturbationOperator.NEGATION:
        falsified = _negate(claim)
    elif operator is PerturbationOperator.ENTITY_SUBSTITUTION:
        ontology = ontology if ontology is not None else load_ontology()
        falsified = _substitute_entity(claim, rng, ontology)
    elif operator is PerturbationOperator.NUMERIC_PERTURBATION:
        falsified = _perturb_numeral(claim, rng)
    else:
        falsified = _reverse_causal(claim)
    if normalize_text(falsified) == normalize_text(claim):
        raise InapplicableOperatorError(
            f"{operator.value} left the claim unchanged: {claim!r}"
        )
    return falsified, PerturbationMeta(operator=operator, original_claim=claim, seed=seed)


def _containment_check_strings(
    record: BenchRecord, originals: dict[int, str]
) -> None:
    factual_sents = {normalize_sentence(s) for s in split_sentences(record.factual_text)}
    falsified_sents = {normalize_sentence(s) for s in split_sentences(record.falsified_text)}
    problems = []
    for i, labeled in enumerate(record.claims):
        key = normalize_sentence(labeled.text)
        if labeled.label == "factual":
            if key not in factual_sents:
                problems.append(f"factual claim missing from factual_text: {labeled.text!r}")
            if key not in falsified_sents:
                problems.append(f"factual claim missing from falsified_text: {labeled.text!r}")
        else:
            original_key = normalize_sentence(originals[i])
            if key in factual_sents:
                problems.append(f"falsified claim present in factual_text: {labeled.text!r}")
            if key not in falsified_sents:
                problems.append(f"falsified claim missing from falsified_text: {labeled.text!r}")
            if original_key in falsified_sents:
                problems.append(
                    f"original claim still present in falsified_text: {originals[i]!r}"
                )
    if problems:
        raise CurationCheckError("; ".join(problems))


def _containment_check_llm(
    record: BenchRecord, originals: dict[int, str], backend: Backend
) -> None:
    problems = []
    for i, labeled in enumerate(record.claims):
        if labeled.label != "falsified":
            continue
        in_factual = backend.complete(
            PromptRole.VERIFY_LEAF,
            {"claim": labeled.text, "evidence": record.factual_text},
        )
        if in_factual["decision"] == "accept":
            problems.append(f"factual_text entails falsified claim: {labeled.text!r}")
        in_falsified = backend.complete(
            PromptRole.VERIFY_LEAF,
            {"claim": labeled.text, "evidence": record.falsified_text},
        )
        if in_falsified["decision"] != "accept":
            problems.append(f"falsified_text does not state the claim: {labeled.text!r}")
        original_kept = backend.complete(
            PromptRole.VERIFY_LEAF,
            {"claim": originals[i], "evidence": record.falsified_text},
        )
        if original_kept["decision"] == "accept":
            problems.append(f"falsified_text still entails original: {originals[i]!r}")
    if problems:
        raise CurationCheckError("; ".join(problems))


def curate(
    text: str,
    category: Category | str,
    seed: int,
    backend: Backend,
    *,
    record_id: str | None = None,
    falsify_count: int = 1,
    check_mode: str = "strings",
    ontology: dict[str, list[str]] | None = None,
) -> BenchRecord:
    """Build one labeled benchmark record from a source passage.

    The claims to falsify are chosen uniformly with ``random.Random(seed)``,
    then each is perturbed by an operator drawn uniformly from the ones
    applicable to it. Both generated texts must pass a containment check:
    sentence-membership string checks in ``strings`` mode, judgment prompts
    in ``llm`` mode.
    """
    if not text or not text.strip():
        raise InvalidInputError("text must be non-empty")
    category = Category(category)
    if check_mode not in ("strings", "llm"):
        raise InvalidInputError(f"unknown check_mode {check_mode!r}")
    n_sentences = len(split_sentences(text))
    low, high = SENTENCE_COUNT_SOFT_RANGE
    if not low <= n_sentences <= high:
        logger.warning(
            "passage has %d sentences, outside the expected %d-%d range",
            n_sentences,
            low,
            high,
        )

    items = backend.complete(PromptRole.CURATE_EXTRACT, {"text": text}, repair_rounds=2)
    texts: list[str] = []
    seen: set[str] = set()
    for item in sorted(items, key=lambda it: (it["span_start"], it["span_end"])):
        key = normalize_text(item["text"])
        if key not in seen:
            seen.add(key)
            texts.append(item["text"])
    if not texts:
        raise ExtractionFailedError("curation extracted no claims")
    if falsify_count < 1 or falsify_count > len(texts):
        raise InvalidInputError(
            f"falsify_count must be between 1 and {len(texts)}, got {falsify_count}"
        )

    ontology = ontology if ontology is not None else load_ontology()
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(texts)), falsify_count))

    originals: dict[int, str] = {}
    labeled: list[LabeledClaim] = []
    final_texts = list(texts)
    for idx in range(len(texts)):
        if idx not in chosen:
            labeled.append(LabeledClaim(text=texts[idx], label="factual"))
            continue
        operator = rng.choice(applicable_operators(texts[idx], ontology))
        op_seed = rng.randrange(2**31)
        falsified_claim, meta = falsify(texts[idx], operator, op_seed, ontology)
        originals[idx] = texts[idx]
        final_texts[idx] = falsified_claim
        labeled.append(
            LabeledClaim(text=falsified_claim, label="falsified", perturbation=meta)
        )

    factual_join = " ".join(texts)
    falsified_join = " ".join(final_texts)
    factual_text = backend.complete(
        PromptRole.CURATE_PARAPHRASE, {"text": text, "claims": factual_join}
    )["text"]
    falsified_text = backend.complete(
        PromptRole.CURATE_ALTERNATIVE, {"text": text, "claims": falsified_join}
    )["text"]

    record = BenchRecord(
        id=record_id or f"rec-{seed}",
        category=category,
        source_text=text,
        factual_text=factual_text,
        falsified_text=falsified_text,
        claims=labeled,
    )
    if len(record.falsified_claims()) != falsify_count:
        raise CurationCheckError(
            f"expected {falsify_count} falsified claim(s), got "
            f"{len(record.falsified_claims())}"
        )
    if normalize_text(record.falsified_text) == normalize_text(record.factual_text):
        raise CurationCheckError("falsified_text does not differ from factual_text")
    if check_mode == "strings":
        _containment_check_strings(record, originals)
    else:
        _containment_check_llm(record, originals, backend)
    return record


@dataclass
class CategoryStats:
    num_texts: int = 0
    num_claims: int = 0
    avg_tokens: float = 0.0
    positive_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "num_texts": self.num_texts,
            "num_claims": self.num_claims,
            "avg_tokens": self.avg_tokens,
            "positive_rate": self.positive_rate,
        }


@dataclass
class DatasetStats:
    per_category: dict[str, CategoryStats] = field(default_factory=dict)
    overall: CategoryStats = field(default_factory=CategoryStats)

    def to_dict(self) -> dict:
        return {
            "per_category": {k: v.to_dict() for k, v in self.per_category.items()},
            "overall": self.overall.to_dict(),
        }


def stats(records: list[BenchRecord]) -> DatasetStats:
    """Per-category and overall counts; rates are claim-weighted, token
    averages text-weighted, so grouped stats recombine exactly."""
    buckets: dict[str, list[BenchRecord]] = {}
    for record in records:
        buckets.setdefault(record.category.value, []).append(record)

    per_category = {}
    total_texts = total_claims = total_tokens = total_factual = 0
    for name in sorted(buckets):
        group = buckets[name]
        num_texts = len(group)
        num_claims = sum(len(r.claims) for r in group)
        tokens = sum(len(r.factual_text.split()) for r in group)
        factual = sum(
            1 for r in group for claim in r.claims if claim.label == "factual"
        )
        per_category[name] = CategoryStats(
            num_texts=num_texts,
            num_claims=num_claims,
            avg_tokens=tokens / num_texts if num_texts else 0.0,
            positive_rate=factual / num_claims if num_claims else 0.0,
        )
        total_texts += num_texts
        total_claims += num_claims
        total_tokens += tokens
        total_factual += factual

    overall = CategoryStats(
        num_texts=total_texts,
        num_claims=total_claims,
        avg_tokens=total_tokens / total_texts if total_texts else 0.0,
        positive_rate=total_factual / total_claims if total_claims else 0.0,
    )
    return DatasetStats(per_category=per_category, overall=overall)


def derive_record_seed(global_seed: int, record_id: str) -> int:
    """Per-record seed from (global seed, record id); order-independent."""
    digest = hashlib.sha256(f"{global_seed}\x1f{record_id}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def load_passages_jsonl(path: str | Path) -> list[dict]:
    """Raw curation input: one ``{id, category, text}`` object per line."""
    passages = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            passages.append(
                {
                    "id": str(record["id"]),
                    "category": record.get("category"),
                    "question_type": record.get("question_type"),
                    "text": record["text"],
                }
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise InvalidInputError(f"bad passage on line {line_no}: {err}") from err
    return passages


def load_category_map(path: str | Path) -> dict[str, Category]:
    """User-editable mapping from source question types to categories."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {qtype: Category(cat) for qtype, cat in raw.items()}


def map_question_type(question_type: str, mapping: dict[str, Category]) -> Category:
    try:
        return mapping[question_type]
    except KeyError:
        raise InvalidInputError(
            f"question type {question_type!r} has no category mapping"
        ) from None


def write_records_jsonl(records: list[BenchRecord], path: str | Path) -> None:
    lines = [
        json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False)
        for record in records
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_records_jsonl(path: str | Path) -> list[BenchRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(BenchRecord.from_dict(json.loads(line)))
    return records
