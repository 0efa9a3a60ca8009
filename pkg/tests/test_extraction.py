from __future__ import annotations

import json

import pytest

from claimtree.backend import PromptRole, ScriptedBackend, scripted_entry
from claimtree.errors import ExtractionFailedError, InvalidInputError
from claimtree.extraction import (
    ExtractionStrategy,
    StrategyKind,
    decontextualize,
    extract_claims,
)
from claimtree.textutils import normalize_text

from fixtures_data import GLAUCOMA
from helpers import QueueBackend, claim_spans


def _scripted_for(passage: str, items: list[dict], strategy: ExtractionStrategy):
    entry = scripted_entry(
        PromptRole.GENERATE,
        {"text": passage},
        items,
        template_id=strategy.prompt_template_id,
    )
    return ScriptedBackend.from_entries([entry])


def test_empty_input_returns_empty_list():
    backend = QueueBackend([])
    assert extract_claims("   ", ExtractionStrategy(), backend) == []
    assert backend.calls == []


def test_glaucoma_fixture_extracts_exactly_its_five_claims():
    strategy = ExtractionStrategy()
    scenario = GLAUCOMA.scenario
    items = claim_spans(scenario.passage, scenario.claims)
    backend = _scripted_for(scenario.passage, items, strategy)
    claims = extract_claims(scenario.passage, strategy, backend)
    assert [c.text for c in claims] == [c.text for c in scenario.claims]
    assert len(claims) == 5
    for claim in claims:
        start, end = claim.source_span
        assert scenario.passage[start:end] == claim.text


def test_duplicate_claims_removed_keeping_first():
    passage = "Timolol lowers pressure. Timolol lowers pressure."
    items = [
        {"text": "Timolol lowers pressure.", "span_start": 0, "span_end": 24},
        {"text": "timolol  lowers pressure.", "span_start": 25, "span_end": 49},
    ]
    strategy = ExtractionStrategy()
    backend = _scripted_for(passage, items, strategy)
    claims = extract_claims(passage, strategy, backend)
    assert len(claims) == 1
    assert claims[0].text == "Timolol lowers pressure."


def test_order_follows_source_order():
    passage = "B happens. A happens."
    items = [
        {"text": "A happens.", "span_start": 11, "span_end": 21},
        {"text": "B happens.", "span_start": 0, "span_end": 10},
    ]
    strategy = ExtractionStrategy()
    backend = _scripted_for(passage, items, strategy)
    claims = extract_claims(passage, strategy, backend)
    assert [c.text for c in claims] == ["B happens.", "A happens."]


def test_heavily_overlapping_span_treated_as_restatement():
    passage = "Aspirin thins the blood effectively."
    items = [
        {"text": "Aspirin thins the blood.", "span_start": 0, "span_end": 30},
        {"text": "Aspirin is a blood thinner.", "span_start": 0, "span_end": 28},
    ]
    strategy = ExtractionStrategy()
    backend = _scripted_for(passage, items, strategy)
    claims = extract_claims(passage, strategy, backend)
    assert len(claims) == 1


def test_span_beyond_input_is_extraction_failure():
    passage = "Short."
    items = [{"text": "Short.", "span_start": 0, "span_end": 999}]
    strategy = ExtractionStrategy()
    backend = _scripted_for(passage, items, strategy)
    with pytest.raises(ExtractionFailedError):
        extract_claims(passage, strategy, backend)


def test_malformed_output_after_repairs_is_extraction_failure():
    backend = QueueBackend(["junk", "more junk", "still junk"])
    with pytest.raises(ExtractionFailedError):
        extract_claims("Some passage.", ExtractionStrategy(), backend)
    assert len(backend.calls) == 3  # initial + two repair rounds


def test_strategy_changes_prompt_not_schema():
    passage = "Fact one stands."
    items = [{"text": "Fact one stands.", "span_start": 0, "span_end": 16}]
    results = {}
    for kind in (StrategyKind.ATOMIC, StrategyKind.DECONTEXT):
        strategy = ExtractionStrategy(kind=kind)
        backend = _scripted_for(passage, items, strategy)
        results[kind] = extract_claims(passage, strategy, backend)
    assert results[StrategyKind.ATOMIC] == results[StrategyKind.DECONTEXT]


def test_med_decontext_runs_rewrite_pass_on_flagged_claims():
    passage = "Timolol is a beta blocker. It reduces pressure."
    strategy = ExtractionStrategy(kind=StrategyKind.MED_DECONTEXT)
    items = [
        {"text": "Timolol is a beta blocker.", "span_start": 0, "span_end": 26},
        {
            "text": "It reduces pressure.",
            "span_start": 27,
            "span_end": 47,
            "self_contained": False,
        },
    ]
    entries = [
        scripted_entry(
            PromptRole.GENERATE,
            {"text": passage},
            items,
            template_id=strategy.prompt_template_id,
        ),
        scripted_entry(
            PromptRole.DECONTEXT,
            {"claim": "It reduces pressure.", "context": passage},
            {"text": "Timolol reduces intraocular pressure."},
        ),
    ]
    backend = ScriptedBackend.from_entries(entries)
    claims = extract_claims(passage, strategy, backend)
    assert claims[1].text == "Timolol reduces intraocular pressure."
    assert claims[1].self_contained is True


def test_decontextualize_rewrites_pronoun_claim():
    context = "Timolol is a beta blocker used in glaucoma. It reduces pressure."
    backend = ScriptedBackend.from_entries(
        [
            scripted_entry(
                PromptRole.DECONTEXT,
                {"claim": "It reduces pressure", "context": context},
                {"text": "Timolol reduces intraocular pressure"},
            )
        ]
    )
    claim = decontextualize("It reduces pressure", context, backend)
    assert claim.text == "Timolol reduces intraocular pressure"
    assert claim.self_contained is True
    start, end = claim.source_span
    assert context[start:end] == "It reduces pressure"


def test_decontextualize_fixed_point_for_self_contained_claim():
    context = "Timolol reduces intraocular pressure in glaucoma patients."
    text = "Timolol reduces intraocular pressure"
    backend = ScriptedBackend.from_entries(
        [
            scripted_entry(
                PromptRole.DECONTEXT,
                {"claim": text, "context": context},
                {"text": text},
            )
        ]
    )
    claim = decontextualize(text, context, backend)
    assert claim.text == text


def test_decontextualize_requires_context():
    backend = QueueBackend([])
    with pytest.raises(InvalidInputError):
        decontextualize("claim", "", backend)


def test_decontextualize_rejects_empty_output():
    backend = QueueBackend([json.dumps({"text": ""}), json.dumps({"text": ""})])
    from claimtree.errors import SchemaValidationError

    with pytest.raises(SchemaValidationError):
        decontextualize("It reduces pressure", "Timolol context", backend)


def test_extraction_idempotent_on_extracted_claim_texts():
    # Re-extracting from the concatenation of extracted claims yields a
    # subset of the original normalized texts.
    strategy = ExtractionStrategy()
    scenario = GLAUCOMA.scenario
    original_items = claim_spans(scenario.passage, scenario.claims)
    backend = _scripted_for(scenario.passage, original_items, strategy)
    first = extract_claims(scenario.passage, strategy, backend)

    concat = " ".join(c.text for c in first)
    concat_items = []
    cursor = 0
    for claim in first:
        start = concat.index(claim.text, cursor)
        concat_items.append(
            {"text": claim.text, "span_start": start, "span_end": start + len(claim.text)}
        )
        cursor = start + len(claim.text)
    backend2 = _scripted_for(concat, concat_items, strategy)
    second = extract_claims(concat, strategy, backend2)

    first_keys = {normalize_text(c.text) for c in first}
    assert {normalize_text(c.text) for c in second} <= first_keys
