"""Shared test machinery: canned backends and scripted-scenario compilation.

A scenario describes, per claim, the verdict the model should hand back and
any sub-claims it should propose. ``compile_scenario`` renders that into
scripted backend entries by running the real planning/retrieval/rerank path
to reproduce the exact evidence blocks the engine will put in its prompts.
Expected verdicts used in assertions are authored independently of the
engine's consolidation logic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from claimtree.backend import Backend, PromptRole, ScriptedBackend, scripted_entry
from claimtree.calculator import Calculator
from claimtree.corpus import CorpusDocument, CorpusIndex, SourceTier
from claimtree.engine import evidence_id, render_evidence_block
from claimtree.retrieval import (
    Evidence,
    QueryPlan,
    Tool,
    ToolKind,
    ToolRegistry,
    execute,
    keyword_query,
    render_tools_block,
    rerank,
)
from claimtree.tree import SpanBudget


class QueueBackend(Backend):
    """Replays a fixed queue of raw response strings and records prompts."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.calls: list[tuple[str, str]] = []

    def _send(self, role: PromptRole, prompt: str) -> str:
        self.calls.append((role.value, prompt))
        if not self.responses:
            raise AssertionError("QueueBackend ran out of queued responses")
        return self.responses.pop(0)


@dataclass
class ClaimScript:
    """One claim's scripted behavior inside a scenario."""

    text: str
    decision: str = "accept"  # accept | reject | unsubstantiated
    reason: str = ""
    subclaims: list["ClaimScript"] = field(default_factory=list)
    plan_tool: str | None = None  # multi-tool registries only
    plan_query: str | None = None
    cite_docs: list[str] | None = None  # source doc ids to cite; default: top-ranked

    def __post_init__(self) -> None:
        if not self.reason:
            self.reason = f"scripted {self.decision} verdict"


@dataclass
class Scenario:
    """A passage, its scripted claims, and the corpus they run against."""

    passage: str
    claims: list[ClaimScript]
    documents: list[CorpusDocument] = field(default_factory=list)
    budget: SpanBudget = field(default_factory=SpanBudget)
    extra_tools: list[str] = field(default_factory=list)  # e.g. ["calculator"]
    top_k: int = 5
    max_results: int = 8


def make_registry(scenario: Scenario) -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(
        Tool(id="corpus", kind=ToolKind.CORPUS_SEARCH, description="local document search"),
        CorpusIndex.build(scenario.documents),
    )
    if "calculator" in scenario.extra_tools:
        registry.register(
            Tool(id="calc", kind=ToolKind.CALCULATOR, description="arithmetic and clinical scores"),
            Calculator(),
        )
    return registry


class EntrySet:
    """Fixture entries deduplicated by (role, digest); conflicts are bugs."""

    def __init__(self) -> None:
        self.entries: dict[tuple[str, str], dict] = {}

    def add(self, entry: dict) -> None:
        key = (entry["role"], entry["digest"])
        existing = self.entries.get(key)
        if existing is not None and existing["response"] != entry["response"]:
            raise AssertionError(f"conflicting scripted responses for {key}")
        self.entries[key] = entry

    def to_list(self) -> list[dict]:
        return list(self.entries.values())


def claim_spans(passage: str, claims: list[ClaimScript]) -> list[dict]:
    items = []
    cursor = 0
    for claim in claims:
        start = passage.find(claim.text, cursor)
        if start < 0:
            start = passage.find(claim.text)
        if start < 0:
            start, end = 0, min(len(claim.text), len(passage))
        else:
            end = start + len(claim.text)
            cursor = end
        items.append({"text": claim.text, "span_start": start, "span_end": end})
    return items


def scoped_evidence_for(
    claim: ClaimScript, scenario: Scenario, registry: ToolRegistry
) -> tuple[QueryPlan, list[Evidence]]:
    """Reproduce the plan and run-scoped evidence the engine will compute."""
    multi_tool = len(registry) > 1
    if multi_tool:
        tool_id = claim.plan_tool or "corpus"
        query = claim.plan_query or keyword_query(claim.text)
    else:
        tool_id = registry.tools()[0].id
        query = keyword_query(claim.text)
    plan = QueryPlan(tool_id=tool_id, query=query, origin_node="?")
    docs = execute(plan, registry, scenario.max_results)
    ranked = rerank(docs, claim.text, scenario.top_k)
    scoped = [
        Evidence(
            id=evidence_id(claim.text, plan.tool_id, ev.id),
            tool_id=ev.tool_id,
            tier=ev.tier,
            title=ev.title,
            content=ev.content,
            relevance=ev.relevance,
            uri=ev.uri,
        )
        for ev in ranked
    ]
    return plan, scoped


def _compile_claim(
    claim: ClaimScript,
    parent_text: str,
    scenario: Scenario,
    registry: ToolRegistry,
    entries: EntrySet,
) -> None:
    multi_tool = len(registry) > 1
    if multi_tool:
        entries.add(
            scripted_entry(
                PromptRole.QUERY,
                {
                    "claim": claim.text,
                    "parent_claim": parent_text,
                    "tools": render_tools_block(registry),
                },
                {
                    "tool_id": claim.plan_tool or "corpus",
                    "query": claim.plan_query or keyword_query(claim.text),
                },
            )
        )
    plan, scoped = scoped_evidence_for(claim, scenario, registry)
    block = render_evidence_block(scoped)
    if scoped:
        if claim.cite_docs is not None:
            wanted = {evidence_id(claim.text, plan.tool_id, doc) for doc in claim.cite_docs}
            cited = [ev.id for ev in scoped if ev.id in wanted]
            if len(cited) != len(wanted):
                raise AssertionError(
                    f"cite_docs {claim.cite_docs} not all retrieved for {claim.text!r}"
                )
        else:
            cited = [scoped[0].id] if claim.decision in ("accept", "reject") else []
        entries.add(
            scripted_entry(
                PromptRole.VERIFY_LEAF,
                {"claim": claim.text, "evidence": block},
                {
                    "decision": claim.decision,
                    "reason": claim.reason,
                    "evidence_ids": cited,
                },
            )
        )
    if claim.decision == "unsubstantiated":
        entries.add(
            scripted_entry(
                PromptRole.SPAN,
                {"claim": claim.text, "evidence": block},
                [sub.text for sub in claim.subclaims],
            )
        )
        for sub in claim.subclaims:
            _compile_claim(sub, claim.text, scenario, registry, entries)


def compile_scenario_entries(scenario: Scenario, registry: ToolRegistry) -> list[dict]:
    """Fixture entries covering every call the engine may make for this run."""
    entries = EntrySet()
    entries.add(
        scripted_entry(
            PromptRole.GENERATE,
            {"text": scenario.passage},
            claim_spans(scenario.passage, scenario.claims),
        )
    )
    for claim in scenario.claims:
        _compile_claim(claim, scenario.passage, scenario, registry, entries)
    return entries.to_list()


def compile_scenario(scenario: Scenario, registry: ToolRegistry) -> ScriptedBackend:
    return ScriptedBackend.from_entries(compile_scenario_entries(scenario, registry))


def materialize_run(scenario: Scenario, target_dir) -> tuple[str, str]:
    """Write the fixture file, corpus, config, and input text for CLI runs.

    Returns (config_path, input_path).
    """
    import json
    from pathlib import Path

    target = Path(target_dir)
    target.mkdir(parents=True, exist_ok=True)

    registry = make_registry(scenario)
    entries = compile_scenario_entries(scenario, registry)
    fixture_path = target / "fixture.json"
    fixture_path.write_text(
        json.dumps({"schema_version": "1", "entries": entries}, sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )

    corpus_path = target / "corpus.jsonl"
    corpus_path.write_text(
        "\n".join(json.dumps(doc.to_dict(), sort_keys=True) for doc in scenario.documents)
        + ("\n" if scenario.documents else ""),
        encoding="utf-8",
    )

    tools = [
        {
            "id": "corpus",
            "kind": "corpus_search",
            "description": "local document search",
            "corpus_path": str(corpus_path),
        }
    ]
    if "calculator" in scenario.extra_tools:
        tools.append(
            {"id": "calc", "kind": "calculator", "description": "arithmetic and clinical scores"}
        )
    config = {
        "backend": {"kind": "scripted", "fixture_path": str(fixture_path)},
        "budget": scenario.budget.to_dict(),
        "tools": tools,
        "rerank_top_k": scenario.top_k,
        "max_results": scenario.max_results,
        "seed": 0,
    }
    config_path = target / "config.json"
    config_path.write_text(json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    input_path = target / "input.txt"
    input_path.write_text(scenario.passage, encoding="utf-8")
    return str(config_path), str(input_path)


def expected_state(claim: ClaimScript, depth: int, budget: SpanBudget) -> str:
    """Independent expectation for a claim's final state.

    Mirrors the *documented* verdict rules, computed from the scenario alone:
    leaf verdicts come straight from the script; an unsettled claim that can
    span resolves to rejected if any sub-claim resolves rejected, accepted if
    all resolve accepted, else unsubstantiated.
    """
    if claim.decision in ("accept", "reject"):
        return {"accept": "accepted", "reject": "rejected"}[claim.decision]
    can_span = depth + 1 <= budget.max_depth and claim.subclaims
    if not can_span:
        return "unsubstantiated"
    child_states = [expected_state(sub, depth + 1, budget) for sub in claim.subclaims]
    if "rejected" in child_states:
        return "rejected"
    if all(state == "accepted" for state in child_states):
        return "accepted"
    return "unsubstantiated"


def doc_for(claim_text: str, doc_id: str, *, contradicts: bool = False,
            tier: SourceTier = SourceTier.PEER_REVIEWED) -> CorpusDocument:
    """A corpus document lexically matched to the claim."""
    stance = "Evidence contradicts" if contradicts else "Evidence supports"
    return CorpusDocument(
        id=doc_id,
        title=f"Reference on {claim_text[:40]}",
        body=f"{stance}: {claim_text}",
        tier=tier,
    )


@dataclass
class CurationScript:
    """Predicted curation outcome plus the scripted backend that drives it."""

    backend: ScriptedBackend
    final_texts: list[str]
    chosen: list[int]
    factual_text: str
    falsified_text: str


def curation_script(
    text: str,
    claim_texts: list[str],
    seed: int,
    falsify_count: int = 1,
    ontology: dict | None = None,
) -> CurationScript:
    """Replay the documented seeding protocol to predict what curation will
    falsify, then compile the scripted entries the curator will request.

    Protocol: ``random.Random(seed)`` draws ``sample(range(n), k)`` for the
    claims to falsify (processed in ascending index order), then per chosen
    claim a ``choice`` over its applicable operators and a ``randrange(2**31)``
    operator seed.
    """
    from claimtree.bench import applicable_operators, falsify, load_ontology

    ontology = ontology if ontology is not None else load_ontology()
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(claim_texts)), falsify_count))
    final_texts = list(claim_texts)
    for idx in range(len(claim_texts)):
        if idx not in chosen:
            continue
        operator = rng.choice(applicable_operators(claim_texts[idx], ontology))
        op_seed = rng.randrange(2**31)
        falsified, _ = falsify(claim_texts[idx], operator, op_seed, ontology)
        final_texts[idx] = falsified

    factual_text = " ".join(claim_texts)
    falsified_text = " ".join(final_texts)
    items = []
    cursor = 0
    for claim in claim_texts:
        start = text.find(claim, cursor)
        if start < 0:
            start = text.find(claim)
        end = start + len(claim) if start >= 0 else min(len(claim), len(text))
        start = max(start, 0)
        cursor = end
        items.append({"text": claim, "span_start": start, "span_end": end})
    entries = [
        scripted_entry(PromptRole.CURATE_EXTRACT, {"text": text}, items),
        scripted_entry(
            PromptRole.CURATE_PARAPHRASE,
            {"text": text, "claims": " ".join(claim_texts)},
            {"text": factual_text},
        ),
        scripted_entry(
            PromptRole.CURATE_ALTERNATIVE,
            {"text": text, "claims": " ".join(final_texts)},
            {"text": falsified_text},
        ),
    ]
    return CurationScript(
        backend=ScriptedBackend.from_entries(entries),
        final_texts=final_texts,
        chosen=chosen,
        factual_text=factual_text,
        falsified_text=falsified_text,
    )


def random_scenario(seed: int) -> Scenario:
    """A randomized but fully scripted scenario; pure function of the seed."""
    rng = random.Random(seed)
    if rng.random() < 0.2:
        budget = SpanBudget(
            max_depth=rng.randint(1, 3),
            max_children_per_node=rng.randint(1, 5),
            max_total_nodes=rng.randint(2, 64),
        )
    else:
        budget = SpanBudget()

    documents: list[CorpusDocument] = []
    claims: list[ClaimScript] = []

    def make_claim(prefix: str, depth: int) -> ClaimScript:
        token = f"{prefix}t"
        text = f"Factor {prefix} modulates marker {token} in patients."
        roll = rng.random()
        if roll < 0.35:
            documents.append(doc_for(text, f"doc-{prefix}"))
            return ClaimScript(text=text, decision="accept")
        if roll < 0.55:
            documents.append(doc_for(text, f"doc-{prefix}", contradicts=True))
            return ClaimScript(text=text, decision="reject")
        if roll < 0.75 or depth >= 3:
            if rng.random() < 0.5:
                documents.append(doc_for(text, f"doc-{prefix}"))
            return ClaimScript(text=text, decision="unsubstantiated")
        subclaims = [
            make_claim(f"{prefix}s{j}", depth + 1)
            for j in range(rng.randint(1, 3))
        ]
        if rng.random() < 0.5:
            documents.append(doc_for(text, f"doc-{prefix}"))
        return ClaimScript(text=text, decision="unsubstantiated", subclaims=subclaims)

    for i in range(rng.randint(1, 4)):
        claims.append(make_claim(f"c{seed}x{i}", 1))
    passage = " ".join(claim.text for claim in claims)
    return Scenario(passage=passage, claims=claims, documents=documents, budget=budget)
