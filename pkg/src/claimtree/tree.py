"""Verification-tree data model: node state machine, readiness order, persistence.

A tree starts as a single root node holding the input text and grows as
claims are attached beneath it. Every node moves through exactly one state
transition: ``verifying`` to one of the final verdicts. All mutation must go
through a single writer (the caller's responsibility); concurrent readers
are safe once a reference is published.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    BudgetExhaustedError,
    DoubleFinalizeError,
    InvalidInputError,
    MissingReferencesError,
    NodeStateError,
    SchemaVersionError,
    TreeInvariantError,
    UnknownNodeError,
)

TREE_SCHEMA_VERSION = "1"


class NodeState(str, Enum):
    """Lifecycle of a claim node."""

    VERIFYING = "verifying"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    UNSUBSTANTIATED = "unsubstantiated"


FINAL_STATES = frozenset(
    {NodeState.ACCEPTED, NodeState.REJECTED, NodeState.UNSUBSTANTIATED}
)


@dataclass
class EvidenceRef:
    """Pointer to a stored evidence item, optionally narrowed to a span."""

    evidence_id: str
    span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "evidence_id": self.evidence_id,
            "span": list(self.span) if self.span is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvidenceRef":
        span = data.get("span")
        return cls(
            evidence_id=data["evidence_id"],
            span=(int(span[0]), int(span[1])) if span is not None else None,
        )


@dataclass
class SpanBudget:
    """Hard caps that keep every verification run bounded."""

    max_depth: int = 3
    max_children_per_node: int = 5
    max_total_nodes: int = 64

    def __post_init__(self) -> None:
        for name in ("max_depth", "max_children_per_node", "max_total_nodes"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise InvalidInputError(f"{name} must be an integer >= 1, got {value!r}")

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "max_children_per_node": self.max_children_per_node,
            "max_total_nodes": self.max_total_nodes,
        }


DEFAULT_BUDGET = SpanBudget()


@dataclass
class ClaimNode:
    """One claim under verification, with its verdict once finalized."""

    id: str
    claim: str
    state: NodeState = NodeState.VERIFYING
    reason: str | None = None
    references: list[EvidenceRef] = field(default_factory=list)
    depth: int = 0
    parent: str | None = None
    children: list[str] = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children

    def is_final(self) -> bool:
        return self.state in FINAL_STATES

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "claim": self.claim,
            "state": self.state.value,
            "reason": self.reason,
            "references": [ref.to_dict() for ref in self.references],
            "depth": self.depth,
            "parent": self.parent,
            "children": list(self.children),
        }


@dataclass
class VerificationTree:
    """Rooted ordered tree of claim nodes plus the originating input text."""

    query: str
    budget: SpanBudget
    root: str
    nodes: dict[str, ClaimNode]
    _next_id: int = 0

    def node(self, node_id: str) -> ClaimNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node with id {node_id!r}") from None

    def node_count(self) -> int:
        return len(self.nodes)

    def children_of(self, node_id: str) -> list[ClaimNode]:
        return [self.nodes[cid] for cid in self.node(node_id).children]

    def depth_nodes(self, depth: int) -> list[ClaimNode]:
        """Nodes at a given depth in id (creation) order."""
        ordered = sorted(self.nodes.values(), key=lambda n: int(n.id))
        return [n for n in ordered if n.depth == depth]

    def to_dict(self) -> dict:
        return {
            "schema_version": TREE_SCHEMA_VERSION,
            "query": self.query,
            "budget": self.budget.to_dict(),
            "root": self.root,
            "nodes": {nid: node.to_dict() for nid, node in self.nodes.items()},
        }


def new_tree(query: str, budget: SpanBudget | None = None) -> VerificationTree:
    """Create a tree whose single root node holds the input text.

    Raises:
        InvalidInputError: if the query is empty after whitespace trimming.
    """
    if not query or not query.strip():
        raise InvalidInputError("query must be non-empty")
    budget = budget if budget is not None else SpanBudget()
    root = ClaimNode(id="0", claim=query, depth=0, parent=None)
    return VerificationTree(
        query=query, budget=budget, root="0", nodes={"0": root}, _next_id=1
    )


def add_children(
    tree: VerificationTree, parent_id: str, claims: list[str]
) -> list[str]:
    """Attach one child node per claim text, in order, atomically.

    The whole batch is rejected (tree left unchanged) if it would push the
    parent past ``max_children_per_node``, the tree past ``max_total_nodes``,
    or the children past ``max_depth``.
    """
    parent = tree.node(parent_id)
    if parent.is_final():
        raise NodeStateError(
            f"node {parent_id} is already finalized ({parent.state.value})"
        )
    if not claims:
        raise InvalidInputError("claims must contain at least one entry")
    for claim in claims:
        if not claim or not claim.strip():
            raise InvalidInputError("child claims must be non-empty")

    budget = tree.budget
    if len(parent.children) + len(claims) > budget.max_children_per_node:
        raise BudgetExhaustedError(
            f"adding {len(claims)} children to node {parent_id} would exceed "
            f"max_children_per_node={budget.max_children_per_node}"
        )
    if tree.node_count() + len(claims) > budget.max_total_nodes:
        raise BudgetExhaustedError(
            f"adding {len(claims)} nodes would exceed "
            f"max_total_nodes={budget.max_total_nodes}"
        )
    if parent.depth + 1 > budget.max_depth:
        raise BudgetExhaustedError(
            f"children of node {parent_id} would exceed max_depth={budget.max_depth}"
        )

    new_ids: list[str] = []
    for claim in claims:
        node_id = str(tree._next_id)
        tree._next_id += 1
        tree.nodes[node_id] = ClaimNode(
            id=node_id, claim=claim, depth=parent.depth + 1, parent=parent_id
        )
        parent.children.append(node_id)
        new_ids.append(node_id)
    return new_ids


def finalize(
    tree: VerificationTree,
    node_id: str,
    state: NodeState,
    reason: str,
    refs: list[EvidenceRef] | None = None,
) -> ClaimNode:
    """Move a node from ``verifying`` to a final verdict; immutable afterward.

    A leaf that is accepted or rejected must cite at least one evidence
    reference. Consolidated (non-leaf) verdicts may carry empty references.
    """
    node = tree.node(node_id)
    if node.is_final():
        raise DoubleFinalizeError(
            f"node {node_id} already finalized as {node.state.value}"
        )
    if state not in FINAL_STATES:
        raise InvalidInputError(f"finalize requires a final state, got {state!r}")
    if not reason or not reason.strip():
        raise InvalidInputError("reason must be non-empty")
    refs = list(refs) if refs else []
    if node.is_leaf() and state in (NodeState.ACCEPTED, NodeState.REJECTED) and not refs:
        raise MissingReferencesError(
            f"leaf node {node_id} cannot be {state.value} without evidence references"
        )
    node.state = state
    node.reason = reason
    node.references = refs
    return node


def consolidation_ready(tree: VerificationTree) -> list[str]:
    """Verifying nodes whose children are all finalized, deepest first.

    Childless nodes are excluded (they are settled by leaf verification, not
    consolidation). Order is decreasing depth, stable in creation order
    within a depth, which yields a valid children-before-parent schedule.
    """
    ordered = sorted(tree.nodes.values(), key=lambda n: int(n.id))
    ready = [
        node
        for node in ordered
        if node.state is NodeState.VERIFYING
        and node.children
        and all(tree.nodes[cid].is_final() for cid in node.children)
    ]
    ready.sort(key=lambda n: -n.depth)
    return [node.id for node in ready]


def validate_tree(tree: VerificationTree) -> None:
    """Check every structural invariant; raise TreeInvariantError on failure."""
    nodes = tree.nodes
    if tree.root not in nodes:
        raise TreeInvariantError(f"root id {tree.root!r} missing from node map")
    roots = [nid for nid, node in nodes.items() if node.parent is None]
    if roots != [tree.root] and set(roots) != {tree.root}:
        raise TreeInvariantError(f"expected exactly one root, found {sorted(roots)}")
    root = nodes[tree.root]
    if root.depth != 0:
        raise TreeInvariantError("root depth must be 0")

    for nid, node in nodes.items():
        if node.id != nid:
            raise TreeInvariantError(f"node map key {nid!r} != node id {node.id!r}")
        for cid in node.children:
            if cid not in nodes:
                raise TreeInvariantError(f"node {nid} lists unknown child {cid!r}")
            if nodes[cid].parent != nid:
                raise TreeInvariantError(
                    f"child {cid} does not point back to parent {nid}"
                )
        if node.parent is not None:
            if node.parent not in nodes:
                raise TreeInvariantError(f"node {nid} has unknown parent {node.parent!r}")
            parent = nodes[node.parent]
            if node.id not in parent.children:
                raise TreeInvariantError(
                    f"parent {parent.id} does not list child {nid}"
                )
            if node.depth != parent.depth + 1:
                raise TreeInvariantError(
                    f"node {nid} depth {node.depth} != parent depth {parent.depth} + 1"
                )
        if node.state is not NodeState.VERIFYING:
            if not node.reason or not node.reason.strip():
                raise TreeInvariantError(f"finalized node {nid} has no reason")
            if (
                node.is_leaf()
                and node.state in (NodeState.ACCEPTED, NodeState.REJECTED)
                and not node.references
            ):
                raise TreeInvariantError(
                    f"finalized leaf {nid} ({node.state.value}) has no references"
                )

    # Reachability and acyclicity from the root.
    seen: set[str] = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise TreeInvariantError(f"cycle detected at node {nid}")
        seen.add(nid)
        stack.extend(nodes[nid].children)
    if seen != set(nodes):
        unreachable = sorted(set(nodes) - seen)
        raise TreeInvariantError(f"nodes unreachable from root: {unreachable}")

    if tree.node_count() > tree.budget.max_total_nodes:
        raise TreeInvariantError(
            f"node count {tree.node_count()} exceeds budget "
            f"max_total_nodes={tree.budget.max_total_nodes}"
        )
    max_depth = max(node.depth for node in nodes.values())
    if max_depth > tree.budget.max_depth:
        raise TreeInvariantError(
            f"tree depth {max_depth} exceeds budget max_depth={tree.budget.max_depth}"
        )


def dumps_tree(tree: VerificationTree) -> str:
    """Canonical JSON text; equal trees always serialize to equal bytes."""
    return json.dumps(tree.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save(tree: VerificationTree, path: str | Path) -> None:
    """Write the tree as canonical, schema-versioned JSON."""
    Path(path).write_text(dumps_tree(tree), encoding="utf-8")


def _node_from_dict(data: dict) -> ClaimNode:
    try:
        return ClaimNode(
            id=str(data["id"]),
            claim=data["claim"],
            state=NodeState(data["state"]),
            reason=data.get("reason"),
            references=[EvidenceRef.from_dict(r) for r in data.get("references", [])],
            depth=int(data["depth"]),
            parent=data.get("parent"),
            children=[str(c) for c in data.get("children", [])],
        )
    except (KeyError, TypeError, ValueError) as err:
        raise TreeInvariantError(f"malformed node record: {err}") from err


def loads_tree(text: str) -> VerificationTree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise TreeInvariantError(f"tree file is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise TreeInvariantError("tree file must hold a JSON object")
    version = data.get("schema_version")
    if version != TREE_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported tree schema version {version!r}, expected {TREE_SCHEMA_VERSION!r}"
        )
    try:
        budget = SpanBudget(**data["budget"])
        nodes = {nid: _node_from_dict(nd) for nid, nd in data["nodes"].items()}
        tree = VerificationTree(
            query=data["query"],
            budget=budget,
            root=str(data["root"]),
            nodes=nodes,
        )
    except (KeyError, TypeError) as err:
        raise TreeInvariantError(f"malformed tree file: {err}") from err
    except InvalidInputError as err:
        raise TreeInvariantError(f"malformed budget: {err}") from err
    validate_tree(tree)
    tree._next_id = max(int(nid) for nid in nodes) + 1
    return tree


def load(path: str | Path) -> VerificationTree:
    """Read a tree written by :func:`save`, validating every invariant."""
    return loads_tree(Path(path).read_text(encoding="utf-8"))


def trees_equal(a: VerificationTree, b: VerificationTree) -> bool:
    """Structural equality (ignores the internal id counter)."""
    return a.to_dict() == b.to_dict()
