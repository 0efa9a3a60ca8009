"""Score verifier outputs against gold labels.

Metric definitions used throughout this module:

- A matched claim is correct when (accepted and gold factual) or (rejected
  and gold falsified); an unsubstantiated verdict is incorrect, and a gold
  claim with no matching prediction is incorrect. Accuracy is the fraction
  correct.
- Supported/not-supported counts feed the capped-recall F1: S is the number
  of accepted claims and N the number of rejected plus unsubstantiated ones
  (an undecided claim is counted as not supported, consistent with the
  accuracy rule above). Precision P = S / (S + N) when S + N > 0, else 0;
  recall at K is R@K = min(S / K, 1); F1@K = 2*P*R@K / (P + R@K) when S > 0,
  else 0.
- Per-category rows are aggregated into an "avg" column as unweighted row
  means, and an "overall" column pooled over all claims.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .engine import VerifiedClaim, VerifiedClaimSet
from .errors import AlignmentError, InvalidInputError, UndefinedMetricError
from .textutils import normalize_text, tokenize
from .tree import NodeState

MATCH_THRESHOLD = 0.6
DEFAULT_KS = (5, 10)


@dataclass
class GoldLabel:
    text: str
    label: str  # "factual" | "falsified"
    category: str = "uncategorized"

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise InvalidInputError("gold claim text must be non-empty")
        if self.label not in ("factual", "falsified"):
            raise InvalidInputError(f"unknown gold label {self.label!r}")


@dataclass
class MatchedPair:
    predicted: VerifiedClaim
    gold: GoldLabel
    score: float


@dataclass
class Alignment:
    mode: str
    matched: list[MatchedPair] = field(default_factory=list)
    unmatched_predicted: list[VerifiedClaim] = field(default_factory=list)
    unmatched_gold: list[GoldLabel] = field(default_factory=list)


def token_f1(a: str, b: str) -> float:
    """Harmonic mean of token precision/recall over normalized token multisets."""
    tokens_a, tokens_b = tokenize(a), tokenize(b)
    if not tokens_a or not tokens_b:
        return 0.0
    overlap = sum((Counter(tokens_a) & Counter(tokens_b)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(tokens_a)
    recall = overlap / len(tokens_b)
    return 2 * precision * recall / (precision + recall)


def _claims_of(predicted: VerifiedClaimSet | Sequence[VerifiedClaim]) -> list[VerifiedClaim]:
    if isinstance(predicted, VerifiedClaimSet):
        return list(predicted.claims)
    return list(predicted)


def match_claims(
    predicted: VerifiedClaimSet | Sequence[VerifiedClaim],
    gold: Sequence[GoldLabel],
    mode: str = "fixed",
    threshold: float = MATCH_THRESHOLD,
) -> Alignment:
    """Align predictions to gold claims.

    ``fixed`` mode expects the prediction run to have used the gold claim
    texts verbatim and errors with the diff otherwise. ``matched`` mode
    greedily pairs the highest token-F1 scores at or above ``threshold``;
    leftovers on either side are kept as unmatched.
    """
    claims = _claims_of(predicted)
    if mode == "fixed":
        remaining = list(enumerate(gold))
        matched: list[MatchedPair] = []
        extra: list[VerifiedClaim] = []
        for claim in claims:
            key = normalize_text(claim.claim)
            hit = next((i for i, (_, g) in enumerate(remaining) if normalize_text(g.text) == key), None)
            if hit is None:
                extra.append(claim)
            else:
                matched.append(MatchedPair(claim, remaining.pop(hit)[1], 1.0))
        if extra or remaining:
            missing = [g.text for _, g in remaining]
            raise AlignmentError(
                "fixed mode requires identical claim sets; "
                f"predictions without gold: {[c.claim for c in extra]}; "
                f"gold without predictions: {missing}"
            )
        return Alignment(mode=mode, matched=matched)

    if mode != "matched":
        raise InvalidInputError(f"unknown alignment mode {mode!r}")

    scores = []
    for pi, claim in enumerate(claims):
        for gi, label in enumerate(gold):
            score = token_f1(claim.claim, label.text)
            if score >= threshold:
                scores.append((score, pi, gi))
    # Greedy best-first; ties broken by position for determinism.
    scores.sort(key=lambda item: (-item[0], item[1], item[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    matched = []
    for score, pi, gi in scores:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matched.append(MatchedPair(claims[pi], gold[gi], score))
    unmatched_predicted = [c for i, c in enumerate(claims) if i not in used_p]
    unmatched_gold = [g for i, g in enumerate(gold) if i not in used_g]
    return Alignment(
        mode=mode,
        matched=matched,
        unmatched_predicted=unmatched_predicted,
        unmatched_gold=unmatched_gold,
    )


def _pair_correct(pair: MatchedPair) -> bool:
    if pair.predicted.state is NodeState.ACCEPTED:
        return pair.gold.label == "factual"
    if pair.predicted.state is NodeState.REJECTED:
        return pair.gold.label == "falsified"
    return False


def accuracy(alignment: Alignment) -> float:
    """Fraction of gold-visible claims judged correctly."""
    total = len(alignment.matched) + len(alignment.unmatched_gold)
    if total == 0:
        raise UndefinedMetricError("accuracy is undefined for an empty alignment")
    correct = sum(1 for pair in alignment.matched if _pair_correct(pair))
    return correct / total


def precision_from_counts(supported: int, not_supported: int) -> float:
    if supported < 0 or not_supported < 0:
        raise InvalidInputError("counts must be non-negative")
    total = supported + not_supported
    return supported / total if total > 0 else 0.0


def recall_at_k(supported: int, k: int) -> float:
    if k < 1:
        raise InvalidInputError("K must be >= 1")
    return min(supported / k, 1.0)


def f1_at_k(supported: int, not_supported: int, k: int) -> float:
    """Capped-recall F1; zero whenever nothing is supported."""
    if supported < 0 or not_supported < 0:
        raise InvalidInputError("counts must be non-negative")
    if k < 1:
        raise InvalidInputError("K must be >= 1")
    if supported == 0:
        return 0.0
    precision = precision_from_counts(supported, not_supported)
    recall = recall_at_k(supported, k)
    return 2 * precision * recall / (precision + recall)


@dataclass
class MetricsRow:
    accuracy: float = 0.0
    precision: float = 0.0
    recall_at: dict[int, float] = field(default_factory=dict)
    f1_at: dict[int, float] = field(default_factory=dict)
    counts: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "f1_at": {str(k): v for k, v in sorted(self.f1_at.items())},
            "counts": dict(sorted(self.counts.items())),
        }


@dataclass
class MetricsReport:
    per_category: dict[str, MetricsRow] = field(default_factory=dict)
    average: MetricsRow = field(default_factory=MetricsRow)
    overall: MetricsRow = field(default_factory=MetricsRow)
    unmatched_predicted: int = 0
    unmatched_gold: int = 0

    def to_dict(self) -> dict:
        return {
            "per_category": {k: v.to_dict() for k, v in sorted(self.per_category.items())},
            "average": self.average.to_dict(),
            "overall": self.overall.to_dict(),
            "unmatched_predicted": self.unmatched_predicted,
            "unmatched_gold": self.unmatched_gold,
        }


def _row_from_parts(
    pairs: list[MatchedPair],
    missing_gold: int,
    extra_claims: list[VerifiedClaim],
    ks: Iterable[int],
) -> MetricsRow:
    verdicts = Counter(pair.predicted.state for pair in pairs)
    verdicts.update(claim.state for claim in extra_claims)
    supported = verdicts[NodeState.ACCEPTED]
    not_supported = verdicts[NodeState.REJECTED] + verdicts[NodeState.UNSUBSTANTIATED]
    total = len(pairs) + missing_gold
    correct = sum(1 for pair in pairs if _pair_correct(pair))
    return MetricsRow(
        accuracy=correct / total if total else 0.0,
        precision=precision_from_counts(supported, not_supported),
        recall_at={k: recall_at_k(supported, k) for k in ks},
        f1_at={k: f1_at_k(supported, not_supported, k) for k in ks},
        counts={
            "accepted": verdicts[NodeState.ACCEPTED],
            "rejected": verdicts[NodeState.REJECTED],
            "unsubstantiated": verdicts[NodeState.UNSUBSTANTIATED],
        },
    )


def _mean_rows(rows: list[MetricsRow], ks: Iterable[int]) -> MetricsRow:
    if not rows:
        return MetricsRow(
            recall_at={k: 0.0 for k in ks},
            f1_at={k: 0.0 for k in ks},
            counts={"accepted": 0.0, "rejected": 0.0, "unsubstantiated": 0.0},
        )
    n = len(rows)
    return MetricsRow(
        accuracy=sum(r.accuracy for r in rows) / n,
        precision=sum(r.precision for r in rows) / n,
        recall_at={k: sum(r.recall_at[k] for r in rows) / n for k in ks},
        f1_at={k: sum(r.f1_at[k] for r in rows) / n for k in ks},
        counts={
            key: sum(r.counts[key] for r in rows) / n
            for key in ("accepted", "rejected", "unsubstantiated")
        },
    )


def report(alignment: Alignment, ks: Iterable[int] = DEFAULT_KS) -> MetricsReport:
    """Per-category rows plus an unweighted average column and pooled overall."""
    ks = tuple(ks)
    if not ks:
        raise InvalidInputError("ks must be non-empty")

    by_category: dict[str, list[MatchedPair]] = {}
    for pair in alignment.matched:
        by_category.setdefault(pair.gold.category, []).append(pair)
    missing_by_category: dict[str, int] = {}
    for gold in alignment.unmatched_gold:
        missing_by_category[gold.category] = missing_by_category.get(gold.category, 0) + 1

    categories = sorted(set(by_category) | set(missing_by_category))
    per_category = {
        name: _row_from_parts(
            by_category.get(name, []), missing_by_category.get(name, 0), [], ks
        )
        for name in categories
    }
    overall = _row_from_parts(
        alignment.matched,
        len(alignment.unmatched_gold),
        list(alignment.unmatched_predicted),
        ks,
    )
    average = _mean_rows(list(per_category.values()), ks)
    return MetricsReport(
        per_category=per_category,
        average=average,
        overall=overall,
        unmatched_predicted=len(alignment.unmatched_predicted),
        unmatched_gold=len(alignment.unmatched_gold),
    )


def render_text(metrics: MetricsReport) -> str:
    """Fixed-width table: one row per metric, one column per category."""
    columns = list(sorted(metrics.per_category)) + ["avg", "overall"]
    rows: list[tuple[str, dict[str, float]]] = []

    def row_values(getter) -> dict[str, float]:
        values = {name: getter(metrics.per_category[name]) for name in metrics.per_category}
        values["avg"] = getter(metrics.average)
        values["overall"] = getter(metrics.overall)
        return values

    rows.append(("accuracy", row_values(lambda r: r.accuracy)))
    rows.append(("precision", row_values(lambda r: r.precision)))
    some_row = metrics.overall
    for k in sorted(some_row.recall_at):
        rows.append((f"recall@{k}", row_values(lambda r, k=k: r.recall_at[k])))
    for k in sorted(some_row.f1_at):
        rows.append((f"f1@{k}", row_values(lambda r, k=k: r.f1_at[k])))
    for key in ("accepted", "rejected", "unsubstantiated"):
        rows.append((key, row_values(lambda r, key=key: r.counts[key])))

    label_width = max(len(label) for label, _ in rows)
    col_width = max(9, max(len(c) for c in columns) + 2)
    header = " " * label_width + "".join(c.rjust(col_width) for c in columns)
    lines = [header]
    for label, values in rows:
        cells = "".join(f"{values[c]:.4f}".rjust(col_width) for c in columns)
        lines.append(label.ljust(label_width) + cells)
    lines.append(
        f"unmatched_predicted={metrics.unmatched_predicted} "
        f"unmatched_gold={metrics.unmatched_gold}"
    )
    return "\n".join(lines) + "\n"


def metrics_json(metrics: MetricsReport) -> str:
    return json.dumps(metrics.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_gold_jsonl(path: str | Path) -> list[GoldLabel]:
    """Gold labels from JSONL with fields text, label, category."""
    labels = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            labels.append(
                GoldLabel(
                    text=record["text"],
                    label=record["label"],
                    category=record.get("category", "uncategorized"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise InvalidInputError(f"bad gold record on line {line_no}: {err}") from err
    return labels


def load_report_claims(path: str | Path) -> list[VerifiedClaim]:
    """Predicted claims from a run's report.json."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    claims = []
    for item in data["claims"]:
        claims.append(
            VerifiedClaim(
                node_id=item["node_id"],
                claim=item["claim"],
                state=NodeState(item["state"]),
                reason=item.get("reason", ""),
                references=[],
            )
        )
    return claims
