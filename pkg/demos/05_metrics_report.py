"""Scoring verifier output against gold labels.

Accuracy follows the verdict-label rule (accepted must be factual, rejected
must be falsified, undecided is wrong); the capped-recall F1 summarizes how
much a response supports at a given fact budget K.
"""

from __future__ import annotations

from claimtree import GoldLabel, NodeState, VerifiedClaim, accuracy, f1_at_k, match_claims, report
from claimtree.metrics import render_text


def claim(text, state, node_id):
    return VerifiedClaim(node_id=node_id, claim=text, state=state, reason="demo")


predicted = [
    claim("Timolol lowers intraocular pressure.", NodeState.ACCEPTED, "1"),
    claim("Latanoprost increases uveoscleral outflow.", NodeState.ACCEPTED, "2"),
    claim("Untreated glaucoma preserves vision indefinitely.", NodeState.REJECTED, "3"),
    claim("Vitamin C cures glaucoma.", NodeState.UNSUBSTANTIATED, "4"),
    claim("Migraine aura precedes headache.", NodeState.ACCEPTED, "5"),
]
gold = [
    GoldLabel("Timolol lowers intraocular pressure.", "factual", "medication"),
    GoldLabel("Latanoprost increases uveoscleral outflow.", "factual", "medication"),
    GoldLabel("Untreated glaucoma preserves vision indefinitely.", "falsified", "treatment"),
    GoldLabel("Vitamin C cures glaucoma.", "falsified", "treatment"),
    GoldLabel("Migraine aura precedes headache.", "factual", "symptom"),
]

alignment = match_claims(predicted, gold, mode="fixed")
print(f"accuracy: {accuracy(alignment):.2f}  (undecided claims count as wrong)")

print("\ncapped-recall F1 as K grows, for 4 supported / 1 not supported:")
for k in (1, 2, 4, 5, 10):
    print(f"  K={k:2d}  f1@K={f1_at_k(4, 1, k):.3f}")

print("\nfull table:")
print(render_text(report(alignment, ks=(5, 10))))
