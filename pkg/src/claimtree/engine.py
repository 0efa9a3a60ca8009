"""Verification orchestration: leaf judgment, spanning, and consolidation.

A run extracts top-level claims from the input text, judges each claim
against retrieved evidence, decomposes claims the evidence cannot settle
into sub-claims (spanning, bounded by the tree budget), and finally derives
parent verdicts bottom-up from child verdicts (consolidation). The finished
run is persisted to a directory: ``run.json``, ``tree.json``,
``evidence/<id>.json``, ``report.json``, and an append-only ``events.log``.

Sibling claims may be investigated concurrently; all tree mutation happens
on the coordinating thread, in node-id order, so artifacts are identical
regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .backend import Backend, PromptRole
from .config import RunConfig
from .errors import (
    BackendError,
    DoubleFinalizeError,
    EvidenceUnavailableError,
    ExtractionFailedError,
    NodeStateError,
    PartialRunError,
)
from .extraction import ExtractionStrategy, extract_claims
from .retrieval import Evidence, QueryPlan, ToolRegistry, execute, plan_query, rerank
from .textutils import normalize_text
from .tree import (
    ClaimNode,
    EvidenceRef,
    NodeState,
    VerificationTree,
    add_children,
    consolidation_ready,
    finalize,
    new_tree,
    save,
    validate_tree,
)

REPORT_SCHEMA_VERSION = "1"


class LeafDecision(str, Enum):
    """Per-node judgment: accept/reject terminate, unsubstantiated spans."""

    ACCEPT = "accept"
    REJECT = "reject"
    UNSUBSTANTIATED = "unsubstantiated"


_DECISION_TO_STATE = {
    LeafDecision.ACCEPT: NodeState.ACCEPTED,
    LeafDecision.REJECT: NodeState.REJECTED,
    LeafDecision.UNSUBSTANTIATED: NodeState.UNSUBSTANTIATED,
}


@dataclass
class LeafVerdict:
    decision: LeafDecision
    reason: str
    references: list[EvidenceRef] = field(default_factory=list)


@dataclass
class VerifiedClaim:
    """One finished top-level claim in the run's result."""

    node_id: str
    claim: str
    state: NodeState
    reason: str
    references: list[EvidenceRef] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "claim": self.claim,
            "state": self.state.value,
            "reason": self.reason,
            "references": [ref.to_dict() for ref in self.references],
        }


@dataclass
class VerifiedClaimSet:
    """The depth-1 claims of a finished tree, every verdict final."""

    claims: list[VerifiedClaim]
    tree: VerificationTree
    evidence: dict[str, Evidence] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        counts = {"accepted": 0, "rejected": 0, "unsubstantiated": 0}
        for claim in self.claims:
            counts[claim.state.value] += 1
        return counts

    def report_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "query": self.tree.query,
            "claims": [claim.to_dict() for claim in self.claims],
            "counts": self.counts(),
        }


def evidence_id(claim: str, tool_id: str, source_id: str) -> str:
    """Run-scoped evidence id, stable for a (claim, tool, document) triple."""
    digest = hashlib.sha256(
        f"{claim}\x1f{tool_id}\x1f{source_id}".encode("utf-8")
    ).hexdigest()
    return "ev-" + digest[:12]


def render_evidence_block(evidence: list[Evidence]) -> str:
    """Deterministic evidence listing shared by prompts and fixtures."""
    if not evidence:
        return "(no evidence retrieved)"
    lines = []
    for ev in evidence:
        lines.append(
            f"[{ev.id}] tier={ev.tier.name.lower()} relevance={ev.relevance:.3f} "
            f"title={ev.title}"
        )
        lines.append(ev.content)
    return "\n".join(lines)


def render_children_block(children: list[ClaimNode]) -> str:
    lines = []
    for child in children:
        lines.append(f"node {child.id} [{child.state.value}] {child.claim}")
        lines.append(f"  reason: {child.reason}")
    return "\n".join(lines)


class _EventLog:
    """Append-only JSON-lines journal; content carries no wall-clock times."""

    def __init__(self, path: Path | None):
        self.path = path
        self.seq = 0
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("", encoding="utf-8")

    def emit(self, event: str, **fields) -> None:
        self.seq += 1
        if self.path is None:
            return
        record = {"seq": self.seq, "event": event, **fields}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def verify_leaf(
    node: ClaimNode, evidence: list[Evidence], backend: Backend
) -> LeafVerdict:
    """Judge one claim against the evidence supplied, and only that evidence.

    Empty evidence short-circuits to unsubstantiated without a model call.
    Reference ids outside the supplied evidence are dropped; a grounded
    verdict left with no valid references is downgraded to unsubstantiated.
    """
    if node.state is not NodeState.VERIFYING:
        raise NodeStateError(f"node {node.id} is not verifying")
    if not evidence:
        return LeafVerdict(LeafDecision.UNSUBSTANTIATED, "no evidence retrieved", [])

    reply = backend.complete(
        PromptRole.VERIFY_LEAF,
        {"claim": node.claim, "evidence": render_evidence_block(evidence)},
    )
    valid_ids = {ev.id for ev in evidence}
    refs = []
    seen = set()
    for eid in reply["evidence_ids"]:
        if eid in valid_ids and eid not in seen:
            seen.add(eid)
            refs.append(EvidenceRef(evidence_id=eid))
    decision = LeafDecision(reply["decision"])
    if decision in (LeafDecision.ACCEPT, LeafDecision.REJECT) and not refs:
        return LeafVerdict(
            LeafDecision.UNSUBSTANTIATED,
            f"{reply['reason']} (cited evidence ids were not among the supplied "
            f"evidence; verdict downgraded)",
            [],
        )
    return LeafVerdict(decision, reply["reason"], refs)


def span_subtree(
    tree: VerificationTree,
    node: ClaimNode,
    backend: Backend,
    registry: ToolRegistry | None = None,
    *,
    evidence: list[Evidence] | None = None,
    unsubstantiated_reason: str | None = None,
    references: list[EvidenceRef] | None = None,
    on_event: Callable | None = None,
) -> list[str]:
    """Decompose an unsettled claim into child sub-claims, budget permitting.

    Returns the new child ids. When the budget is exhausted or the model
    proposes no usable sub-claims, the node is finalized unsubstantiated and
    an empty list is returned.
    """
    if node.state is not NodeState.VERIFYING:
        raise NodeStateError(f"node {node.id} is not verifying")
    budget = tree.budget
    reason = unsubstantiated_reason or "evidence insufficient and no decomposition available"

    allowance = min(
        budget.max_children_per_node - len(node.children),
        budget.max_total_nodes - tree.node_count(),
    )
    if node.depth + 1 > budget.max_depth or allowance <= 0:
        finalize(
            tree,
            node.id,
            NodeState.UNSUBSTANTIATED,
            f"{reason} (exploration budget reached)",
            references or [],
        )
        return []

    if evidence is None:
        evidence = []
        if registry is not None and len(registry) > 0:
            parent = tree.nodes.get(node.parent) if node.parent else None
            plan = plan_query(node, parent, registry, backend)
            try:
                docs = execute(plan, registry)
            except EvidenceUnavailableError:
                docs = []
            evidence = rerank(docs, node.claim)

    proposals = backend.complete(
        PromptRole.SPAN,
        {"claim": node.claim, "evidence": render_evidence_block(evidence)},
    )
    subclaims = []
    seen = set()
    for text in proposals:
        key = normalize_text(text)
        if key and key not in seen:
            seen.add(key)
            subclaims.append(text)
    if len(subclaims) > allowance:
        if on_event:
            on_event("span_truncated", node=node.id, proposed=len(subclaims), kept=allowance)
        subclaims = subclaims[:allowance]
    if not subclaims:
        finalize(tree, node.id, NodeState.UNSUBSTANTIATED, reason, references or [])
        return []
    return add_children(tree, node.id, subclaims)


def consolidate(
    tree: VerificationTree,
    node_id: str,
    backend: Backend | None = None,
    mode: str = "deterministic",
    *,
    references: list[EvidenceRef] | None = None,
    parent_evidence_block: str | None = None,
    on_fallback: Callable | None = None,
) -> ClaimNode:
    """Derive a node's verdict from its finalized children.

    Deterministic mode treats every child as essential: accepted only if all
    children accepted, rejected if any child rejected, else unsubstantiated.
    LLM mode lets the model weigh essentiality and may return a category or
    a 1-10 score (<=3 reject, >=8 accept, otherwise unsubstantiated); on
    backend failure it falls back to the deterministic rule, flagged in the
    reason.
    """
    node = tree.node(node_id)
    if node.is_final():
        raise DoubleFinalizeError(f"node {node_id} already finalized")
    children = tree.children_of(node_id)
    if not children:
        raise NodeStateError(f"node {node_id} has no children to consolidate")
    unfinished = [c.id for c in children if not c.is_final()]
    if unfinished:
        raise NodeStateError(
            f"node {node_id} has unfinalized children: {', '.join(unfinished)}"
        )

    if mode == "llm":
        if backend is None:
            raise NodeStateError("llm consolidation mode requires a backend")
        try:
            reply = backend.complete(
                PromptRole.CONSOLIDATE,
                {
                    "claim": node.claim,
                    "children": render_children_block(children),
                    "parent_evidence": parent_evidence_block or "(not provided)",
                },
            )
            state = _consolidation_state(reply)
            ids = ", ".join(c.id for c in children)
            reason = f"{reply['reason']} [children: {ids}]"
            return finalize(tree, node_id, state, reason, references or [])
        except BackendError:
            if on_fallback:
                on_fallback(node_id)
            state, reason = _deterministic_verdict(children)
            reason += " [deterministic fallback after backend failure]"
            return finalize(tree, node_id, state, reason, references or [])

    state, reason = _deterministic_verdict(children)
    return finalize(tree, node_id, state, reason, references or [])


def _consolidation_state(reply: dict) -> NodeState:
    if reply.get("decision") is not None:
        return _DECISION_TO_STATE[LeafDecision(reply["decision"])]
    score = reply["score"]
    if score <= 3:
        return NodeState.REJECTED
    if score >= 8:
        return NodeState.ACCEPTED
    return NodeState.UNSUBSTANTIATED


def _deterministic_verdict(children: list[ClaimNode]) -> tuple[NodeState, str]:
    ids = ", ".join(c.id for c in children)
    rejected = [c.id for c in children if c.state is NodeState.REJECTED]
    unresolved = [c.id for c in children if c.state is NodeState.UNSUBSTANTIATED]
    if rejected:
        return (
            NodeState.REJECTED,
            f"sub-claim(s) rejected: node(s) {', '.join(rejected)} (children: {ids})",
        )
    if unresolved:
        return (
            NodeState.UNSUBSTANTIATED,
            f"sub-claim(s) unresolved: node(s) {', '.join(unresolved)} (children: {ids})",
        )
    return (NodeState.ACCEPTED, f"all {len(children)} sub-claim(s) accepted (nodes {ids})")


@dataclass
class _Investigation:
    plan: QueryPlan
    evidence: list[Evidence]
    verdict: LeafVerdict
    retrieval_failed: bool = False


def _investigate(
    tree: VerificationTree,
    node_id: str,
    backend: Backend,
    registry: ToolRegistry,
    config: RunConfig,
) -> _Investigation:
    """Plan, retrieve, rerank, and judge one leaf. No tree mutation."""
    node = tree.node(node_id)
    parent = tree.nodes.get(node.parent) if node.parent else None
    plan = plan_query(node, parent, registry, backend)
    retrieval_failed = False
    try:
        docs = execute(plan, registry, config.max_results)
    except EvidenceUnavailableError:
        docs = []
        retrieval_failed = True
    ranked = rerank(docs, node.claim, config.rerank_top_k)
    scoped = [
        Evidence(
            id=evidence_id(node.claim, plan.tool_id, ev.id),
            tool_id=ev.tool_id,
            tier=ev.tier,
            title=ev.title,
            content=ev.content,
            relevance=ev.relevance,
            uri=ev.uri,
        )
        for ev in ranked
    ]
    verdict = verify_leaf(node, scoped, backend)
    return _Investigation(plan, scoped, verdict, retrieval_failed)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _resume_token(query: str, seed: int) -> str:
    return hashlib.sha256(f"{query}\x1f{seed}".encode("utf-8")).hexdigest()[:16]


def verify(
    query: str,
    config: RunConfig,
    backend: Backend,
    registry: ToolRegistry,
) -> VerifiedClaimSet:
    """Run the full pipeline over one input text.

    The finished tree contains no verifying nodes and the result lists the
    top-level claims with their final verdicts. When ``config.out_dir`` is
    set, all artifacts are persisted there; on backend exhaustion the
    partial tree is persisted and a PartialRunError carrying a resume token
    is raised.
    """
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    events = _EventLog(out_dir / "events.log" if out_dir else None)

    tree = new_tree(query, config.span_budget())
    evidence_store: dict[str, Evidence] = {}
    leaf_results: dict[str, _Investigation] = {}
    events.emit("run_start", seed=config.seed, query_chars=len(query))

    try:
        result = _run_pipeline(
            tree, query, config, backend, registry, events, evidence_store, leaf_results
        )
    except ExtractionFailedError:
        _persist_partial(out_dir, tree, config, evidence_store, events)
        raise
    except BackendError as err:
        token = _resume_token(query, config.seed)
        _persist_partial(out_dir, tree, config, evidence_store, events, token)
        raise PartialRunError(
            f"backend exhausted mid-run ({err}); partial tree persisted, "
            f"resume token {token}",
            resume_token=token,
        ) from err

    result.evidence = dict(evidence_store)
    events.emit("run_complete", nodes=tree.node_count())
    if out_dir is not None:
        _persist(out_dir, tree, config, evidence_store, result)
    return result


def _run_pipeline(
    tree: VerificationTree,
    query: str,
    config: RunConfig,
    backend: Backend,
    registry: ToolRegistry,
    events: _EventLog,
    evidence_store: dict[str, Evidence],
    leaf_results: dict[str, _Investigation],
) -> VerifiedClaimSet:
    strategy = ExtractionStrategy(kind=config.extraction_strategy)
    claims = extract_claims(query, strategy, backend)
    if not claims:
        raise ExtractionFailedError("no claims extracted from input text")
    texts = [c.text for c in claims]
    budget = tree.budget
    cap = min(budget.max_children_per_node, budget.max_total_nodes - 1)
    if len(texts) > cap:
        events.emit("claims_truncated", proposed=len(texts), kept=cap)
        texts = texts[:cap]
    frontier = add_children(tree, tree.root, texts)
    events.emit("claims_extracted", count=len(frontier), node_ids=list(frontier))

    while frontier:
        investigations = _map_jobs(
            lambda nid: _investigate(tree, nid, backend, registry, config),
            frontier,
            config.jobs,
        )
        next_frontier: list[str] = []
        for node_id, inv in zip(frontier, investigations):
            leaf_results[node_id] = inv
            for ev in inv.evidence:
                evidence_store[ev.id] = ev
            events.emit(
                "evidence_retrieved",
                node=node_id,
                tool=inv.plan.tool_id,
                query=inv.plan.query,
                fallback=inv.plan.fallback,
                retrieval_failed=inv.retrieval_failed,
                evidence_ids=[ev.id for ev in inv.evidence],
            )
            verdict = inv.verdict
            events.emit(
                "leaf_verdict",
                node=node_id,
                decision=verdict.decision.value,
                references=[ref.evidence_id for ref in verdict.references],
            )
            if verdict.decision in (LeafDecision.ACCEPT, LeafDecision.REJECT):
                finalize(
                    tree,
                    node_id,
                    _DECISION_TO_STATE[verdict.decision],
                    verdict.reason,
                    verdict.references,
                )
                events.emit("node_finalized", node=node_id, state=tree.node(node_id).state.value)
            else:
                node = tree.node(node_id)
                children = span_subtree(
                    tree,
                    node,
                    backend,
                    registry,
                    evidence=inv.evidence,
                    unsubstantiated_reason=verdict.reason,
                    references=verdict.references,
                    on_event=events.emit,
                )
                if children:
                    events.emit("span_children", node=node_id, children=children)
                    next_frontier.extend(children)
                else:
                    events.emit("node_finalized", node=node_id, state="unsubstantiated")
        frontier = next_frontier

    while True:
        ready = consolidation_ready(tree)
        if not ready:
            break
        for node_id in ready:
            inv = leaf_results.get(node_id)
            references = inv.verdict.references if inv else []
            parent_block = None
            if config.consolidate_with_parent_evidence and inv and inv.evidence:
                parent_block = render_evidence_block(inv.evidence)
            consolidate(
                tree,
                node_id,
                backend,
                mode=config.consolidation_mode,
                references=references,
                parent_evidence_block=parent_block,
                on_fallback=lambda nid: events.emit("consolidation_fallback", node=nid),
            )
            events.emit(
                "consolidated", node=node_id, state=tree.node(node_id).state.value
            )

    stuck = [nid for nid, node in tree.nodes.items() if not node.is_final()]
    if stuck:
        raise NodeStateError(f"run finished with verifying nodes: {sorted(stuck)}")
    validate_tree(tree)

    root = tree.node(tree.root)
    verified = [
        VerifiedClaim(
            node_id=node.id,
            claim=node.claim,
            state=node.state,
            reason=node.reason or "",
            references=list(node.references),
        )
        for node in (tree.node(cid) for cid in root.children)
    ]
    return VerifiedClaimSet(claims=verified, tree=tree)


def _dump_json(path: Path, data: dict) -> None:
    path.write_text(
        json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_run_json(
    out_dir: Path, config: RunConfig, partial: bool = False, token: str | None = None
) -> None:
    data = {"config": config.to_dict(), "seed": config.seed, "partial": partial}
    if token is not None:
        data["resume_token"] = token
    _dump_json(out_dir / "run.json", data)


def _write_evidence(out_dir: Path, evidence_store: dict[str, Evidence]) -> None:
    ev_dir = out_dir / "evidence"
    ev_dir.mkdir(parents=True, exist_ok=True)
    for eid in sorted(evidence_store):
        _dump_json(ev_dir / f"{eid}.json", evidence_store[eid].to_dict())


def _persist(
    out_dir: Path,
    tree: VerificationTree,
    config: RunConfig,
    evidence_store: dict[str, Evidence],
    result: VerifiedClaimSet,
) -> None:
    _write_run_json(out_dir, config)
    save(tree, out_dir / "tree.json")
    _write_evidence(out_dir, evidence_store)
    _dump_json(out_dir / "report.json", result.report_dict())


def _persist_partial(
    out_dir: Path | None,
    tree: VerificationTree,
    config: RunConfig,
    evidence_store: dict[str, Evidence],
    events: _EventLog,
    token: str | None = None,
) -> None:
    if out_dir is None:
        return
    events.emit("run_aborted", resume_token=token)
    _write_run_json(out_dir, config, partial=True, token=token)
    save(tree, out_dir / "tree.json")
    _write_evidence(out_dir, evidence_store)
