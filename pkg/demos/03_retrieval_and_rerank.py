"""Retrieval building blocks: index search, tier-aware reranking, calculator.

Everything here is deterministic: the same corpus and query always produce
the same ranking, and the calculator is an exact parser, not a model.
"""

from __future__ import annotations

from claimtree import (
    Calculator,
    CorpusDocument,
    CorpusIndex,
    SourceTier,
    Tool,
    ToolKind,
    ToolRegistry,
    execute,
    rerank,
)
from claimtree.retrieval import QueryPlan

DOCS = [
    CorpusDocument("blog", "A blog post", "Timolol lowers intraocular pressure a lot!", SourceTier.GENERAL_WEB),
    CorpusDocument("trial", "Clinical trial", "Timolol lowers intraocular pressure in randomized trials.", SourceTier.PEER_REVIEWED),
    CorpusDocument("text", "Ophthalmology text", "Timolol reduces aqueous humor production.", SourceTier.TEXTBOOK),
    CorpusDocument("wiki", "Encyclopedia entry", "Glaucoma damages the optic nerve.", SourceTier.ENCYCLOPEDIA),
]

index = CorpusIndex.build(DOCS)
registry = ToolRegistry()
registry.register(Tool("corpus", ToolKind.CORPUS_SEARCH, "local search"), index)
registry.register(Tool("calc", ToolKind.CALCULATOR, "arithmetic and clinical scores"), Calculator())

claim = "Timolol lowers intraocular pressure"
plan = QueryPlan(tool_id="corpus", query="timolol intraocular pressure", origin_node="1")
raw = execute(plan, registry)
print(f"retrieved {len(raw)} documents for {plan.query!r}")

print("\nreranked (credibility tier first, lexical relevance second):")
for ev in rerank(raw, claim):
    print(f"  tier={ev.tier.name.lower():13s} relevance={ev.relevance:.2f} {ev.id:6s} {ev.content}")

print("\ncalculator evidence:")
for expression in ("(140 - 90) / 2", "cha2ds2_vasc(0, 1, 70, 0, 0, 0, 1)", "bmi(80, 1.8)"):
    plan = QueryPlan(tool_id="calc", query=expression, origin_node="1")
    (doc,) = execute(plan, registry)
    print(f"  {expression:38s} -> {doc.body}")
