"""A tiny rule-based model used by the demo scripts.

It implements the backend protocol with string heuristics so the demos run
fully offline: extraction splits sentences, leaf judgment compares the
claim's words against the evidence block, curation roles echo the claim
lists back as prose. Wrap it in RecordingBackend to produce a scripted
fixture, as demo 02 shows.
"""

from __future__ import annotations

import json
import re

from claimtree.backend import Backend, PromptRole
from claimtree.textutils import content_words


def _section(prompt: str, header: str) -> str:
    marker = f"{header}:\n"
    start = prompt.rfind(marker)
    if start < 0:
        return ""
    rest = prompt[start + len(marker):]
    match = re.search(r"\n\n[A-Z][a-z]", rest)
    return rest[: match.start()] if match else rest


class RuleModel(Backend):
    """Deterministic stand-in for a chat model."""

    def _send(self, role: PromptRole, prompt: str) -> str:
        if role in (PromptRole.GENERATE, PromptRole.CURATE_EXTRACT):
            passage = _section(prompt, "Passage").strip()
            items = []
            cursor = 0
            for sentence in re.split(r"(?<=\.)\s+", passage):
                sentence = sentence.strip()
                if not sentence:
                    continue
                start = passage.find(sentence, cursor)
                cursor = start + len(sentence)
                items.append(
                    {"text": sentence, "span_start": start, "span_end": cursor}
                )
            return json.dumps(items)

        if role is PromptRole.VERIFY_LEAF:
            claim = _section(prompt, "Claim").strip()
            evidence = _section(prompt, "Evidence")
            first_id = re.search(r"\[([^\]]+)\]", evidence)
            ids = [first_id.group(1)] if first_id else []
            if "contradicts" in evidence.lower():
                verdict = {"decision": "reject", "reason": "evidence contradicts the claim"}
            elif content_words(claim) <= content_words(evidence):
                verdict = {"decision": "accept", "reason": "evidence restates the claim"}
            else:
                verdict = {"decision": "unsubstantiated", "reason": "evidence is insufficient"}
                ids = []
            verdict["evidence_ids"] = ids
            return json.dumps(verdict)

        if role is PromptRole.SPAN:
            return json.dumps([])  # this model never decomposes

        if role is PromptRole.QUERY:
            claim = _section(prompt, "Claim").strip()
            return json.dumps({"tool_id": "corpus", "query": claim.lower()})

        if role in (PromptRole.CURATE_PARAPHRASE, PromptRole.CURATE_ALTERNATIVE):
            claims = _section(prompt, "Claims the paraphrase must preserve") or _section(
                prompt, "Claims the alternative version must state"
            )
            return json.dumps({"text": claims.strip()})

        if role is PromptRole.DECONTEXT:
            claim = _section(prompt, "Claim").strip()
            return json.dumps({"text": claim})

        if role is PromptRole.CONSOLIDATE:
            return json.dumps(
                {"decision": "accept", "reason": "all sub-claims held", "essential_child_ids": []}
            )

        return json.dumps({"text": "unsupported role"})
