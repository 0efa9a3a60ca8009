"""Build a verification tree by hand and walk its lifecycle.

Shows node creation, the one-way state machine, the bottom-up readiness
order, and byte-stable persistence.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from claimtree import (
    EvidenceRef,
    NodeState,
    SpanBudget,
    add_children,
    consolidation_ready,
    finalize,
    load,
    new_tree,
    save,
)
from claimtree.engine import consolidate

QUERY = (
    "Metformin lowers hepatic glucose production. "
    "Metformin is first-line therapy for type 2 diabetes."
)

tree = new_tree(QUERY, SpanBudget(max_depth=3, max_children_per_node=5, max_total_nodes=64))
print(f"new tree: {tree.node_count()} node(s), root state = {tree.node(tree.root).state.value}")

claim_ids = add_children(
    tree,
    tree.root,
    [
        "Metformin lowers hepatic glucose production.",
        "Metformin is first-line therapy for type 2 diabetes.",
    ],
)
print(f"attached {len(claim_ids)} top-level claims -> {tree.node_count()} nodes")

# One claim gets decomposed a level deeper before it can be settled.
sub_ids = add_children(
    tree,
    claim_ids[0],
    [
        "Metformin activates AMP-activated protein kinase in hepatocytes.",
        "AMP-activated protein kinase suppresses gluconeogenesis.",
    ],
)

finalize(tree, sub_ids[0], NodeState.ACCEPTED, "supported by pharmacology text", [EvidenceRef("doc-1")])
finalize(tree, sub_ids[1], NodeState.ACCEPTED, "supported by pathway review", [EvidenceRef("doc-2")])
finalize(tree, claim_ids[1], NodeState.ACCEPTED, "stated by treatment guideline", [EvidenceRef("doc-3")])

print("\nbottom-up consolidation order:")
while ready := consolidation_ready(tree):
    for node_id in ready:
        node = consolidate(tree, node_id, mode="deterministic")
        print(f"  node {node_id} (depth {node.depth}) -> {node.state.value}: {node.reason}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "tree.json"
    save(tree, path)
    reloaded = load(path)
    again = Path(tmp) / "tree2.json"
    save(reloaded, again)
    print(f"\nsaved {path.stat().st_size} bytes; reload+save is byte-identical: "
          f"{path.read_bytes() == again.read_bytes()}")

print("\nfinal states:")
for node_id in sorted(tree.nodes, key=int):
    node = tree.nodes[node_id]
    print(f"  {node_id} depth={node.depth} {node.state.value:15s} {node.claim[:60]}")
