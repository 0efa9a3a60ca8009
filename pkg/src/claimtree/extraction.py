"""Turn long-form text into a list of self-contained atomic claims.

Three prompt strategies are available; they change only the instructions
sent to the model, never the response schema. The ``med_decontext``
strategy additionally runs a rewrite pass over any claim the model flags as
not self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .backend import Backend, PromptRole
from .errors import ExtractionFailedError, InvalidInputError, SchemaValidationError
from .textutils import normalize_text

# Claims whose source spans overlap more than this fraction of the shorter
# span are treated as restatements and dropped.
SPAN_OVERLAP_LIMIT = 0.8

EXTRACTION_REPAIR_ROUNDS = 2


class StrategyKind(str, Enum):
    ATOMIC = "atomic"
    DECONTEXT = "decontext"
    MED_DECONTEXT = "med_decontext"


_STRATEGY_TEMPLATES = {
    StrategyKind.ATOMIC: "extract-atomic-v1",
    StrategyKind.DECONTEXT: "extract-decontext-v1",
    StrategyKind.MED_DECONTEXT: "extract-med-decontext-v1",
}


@dataclass
class ExtractionStrategy:
    """A named extraction prompt variant."""

    kind: StrategyKind = StrategyKind.ATOMIC
    prompt_template_id: str = ""

    def __post_init__(self) -> None:
        self.kind = StrategyKind(self.kind)
        if not self.prompt_template_id:
            self.prompt_template_id = _STRATEGY_TEMPLATES[self.kind]


@dataclass
class ExtractedClaim:
    """A claim plus the character range of the passage it came from."""

    text: str
    source_span: tuple[int, int]
    self_contained: bool = True


def _span_overlap_fraction(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0:
        return 0.0
    shorter = min(a[1] - a[0], b[1] - b[0])
    return inter / shorter if shorter > 0 else 1.0


def _dedup_and_order(items: list[dict], text_len: int) -> list[dict]:
    for item in items:
        if item["span_end"] > text_len:
            raise ExtractionFailedError(
                f"claim span ({item['span_start']}, {item['span_end']}) exceeds "
                f"input length {text_len}"
            )
    items = sorted(items, key=lambda it: (it["span_start"], it["span_end"]))
    kept: list[dict] = []
    seen: set[str] = set()
    for item in items:
        key = normalize_text(item["text"])
        if key in seen:
            continue
        span = (item["span_start"], item["span_end"])
        if any(
            _span_overlap_fraction(span, (k["span_start"], k["span_end"]))
            > SPAN_OVERLAP_LIMIT
            for k in kept
        ):
            continue
        seen.add(key)
        kept.append(item)
    return kept


def extract_claims(
    text: str, strategy: ExtractionStrategy, backend: Backend
) -> list[ExtractedClaim]:
    """Extract atomic claims from a passage, in source order, deduplicated.

    Empty input yields an empty list. Structured-output failures that
    survive the repair rounds surface as ExtractionFailedError.
    """
    if not text or not text.strip():
        return []
    try:
        items = backend.complete(
            PromptRole.GENERATE,
            {"text": text},
            template_id=strategy.prompt_template_id,
            repair_rounds=EXTRACTION_REPAIR_ROUNDS,
        )
    except SchemaValidationError as err:
        raise ExtractionFailedError(
            f"extraction output malformed after {EXTRACTION_REPAIR_ROUNDS} repair "
            f"round(s): {err}"
        ) from err

    kept = _dedup_and_order(items, len(text))
    claims = [
        ExtractedClaim(
            text=item["text"],
            source_span=(item["span_start"], item["span_end"]),
            self_contained=item["self_contained"],
        )
        for item in kept
    ]
    if strategy.kind is StrategyKind.MED_DECONTEXT:
        claims = [
            c if c.self_contained else decontextualize(c.text, text, backend, span=c.source_span)
            for c in claims
        ]
    return claims


def decontextualize(
    claim: str,
    context: str,
    backend: Backend,
    *,
    span: tuple[int, int] | None = None,
) -> ExtractedClaim:
    """Rewrite a claim so every entity is named explicitly.

    The returned claim is flagged self-contained; its span points at the
    original claim's location in the context when one can be found.
    """
    if not claim or not claim.strip():
        raise InvalidInputError("claim must be non-empty")
    if not context or not context.strip():
        raise InvalidInputError("context must be non-empty")
    result = backend.complete(PromptRole.DECONTEXT, {"claim": claim, "context": context})
    text = result["text"]
    if span is None:
        idx = context.find(claim)
        span = (idx, idx + len(claim)) if idx >= 0 else (0, len(context))
    return ExtractedClaim(text=text, source_span=span, self_contained=True)
