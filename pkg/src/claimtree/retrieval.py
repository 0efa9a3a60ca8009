"""Tool registry, query planning, retrieval execution, and evidence reranking.

Three tool kinds exist: local corpus search, web search, and a calculator.
A query planner picks the tool and query for a claim; retrieved documents
are reranked by source credibility tier first and lexical relevance second.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable

from .backend import Backend, PromptRole
from .calculator import Calculator, format_value
from .corpus import CorpusIndex, SourceTier, parse_tier
from .errors import (
    BackendError,
    CalculatorError,
    DuplicateIdError,
    EvidenceUnavailableError,
    InvalidInputError,
    NodeStateError,
    SchemaValidationError,
    ToolTransportError,
)
from .textutils import content_words, tokenize
from .tree import ClaimNode, NodeState

DEFAULT_MAX_RESULTS = 8
DEFAULT_TOP_K = 5

# A calculator result is an exact computation, so it outranks any document.
CALCULATOR_TIER = SourceTier.PEER_REVIEWED


class ToolKind(str, Enum):
    CORPUS_SEARCH = "corpus_search"
    WEB_SEARCH = "web_search"
    CALCULATOR = "calculator"


@dataclass
class Tool:
    """A registered retrieval tool, described to the query planner."""

    id: str
    kind: ToolKind
    description: str


@dataclass
class QueryPlan:
    """The tool plus query chosen for one claim."""

    tool_id: str
    query: str
    origin_node: str
    fallback: bool = False


@dataclass
class RawDocument:
    """A retrieved document before reranking."""

    id: str
    title: str
    body: str
    tier: SourceTier
    tool_id: str
    uri: str | None = None


@dataclass
class Evidence:
    """A reranked snippet with its credibility tier and relevance score."""

    id: str
    tool_id: str
    tier: SourceTier
    title: str
    content: str
    relevance: float
    uri: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tool_id": self.tool_id,
            "tier": self.tier.name.lower(),
            "title": self.title,
            "content": self.content,
            "relevance": self.relevance,
            "uri": self.uri,
        }


class ToolRegistry:
    """Tools plus their bound implementations; read-only after construction."""

    def __init__(self) -> None:
        self._tools: dict[str, Tool] = {}
        self._impls: dict[str, object] = {}
        self._order: list[str] = []

    def register(self, tool: Tool, impl: object) -> None:
        if tool.id in self._tools:
            raise DuplicateIdError(f"tool id {tool.id!r} already registered")
        self._tools[tool.id] = tool
        self._impls[tool.id] = impl
        self._order.append(tool.id)

    def tool(self, tool_id: str) -> Tool:
        try:
            return self._tools[tool_id]
        except KeyError:
            raise InvalidInputError(f"unknown tool id {tool_id!r}") from None

    def impl(self, tool_id: str) -> object:
        self.tool(tool_id)
        return self._impls[tool_id]

    def has(self, tool_id: str) -> bool:
        return tool_id in self._tools

    def tools(self) -> list[Tool]:
        return [self._tools[tid] for tid in self._order]

    def first_of_kind(self, kind: ToolKind) -> Tool | None:
        for tool in self.tools():
            if tool.kind is kind:
                return tool
        return None

    def __len__(self) -> int:
        return len(self._tools)


def load_domain_tiers(path: str | Path | None = None) -> dict[str, SourceTier]:
    """Domain-to-tier map for web results; the bundled map is the default."""
    if path is None:
        text = resources.files("claimtree").joinpath("data/domain_tiers.json").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    return {domain: parse_tier(tier) for domain, tier in raw.items()}


class WebSearchClient:
    """Pluggable HTTP search client normalizing hits to title/snippet/uri/domain.

    ``transport`` is a callable ``(base_url, query, max_results, api_key,
    timeout) -> list[dict]``; the default issues a GET via ``requests`` and
    expects a JSON body with a ``results`` list.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str | None = None,
        transport: Callable | None = None,
        domain_tiers: dict[str, SourceTier] | None = None,
        timeout: float = 10.0,
    ):
        self.base_url = base_url
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._transport = transport or self._requests_transport
        self.domain_tiers = domain_tiers if domain_tiers is not None else load_domain_tiers()

    @staticmethod
    def _requests_transport(
        base_url: str, query: str, max_results: int, api_key: str | None, timeout: float
    ) -> list[dict]:
        import requests

        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        try:
            response = requests.get(
                base_url,
                params={"q": query, "count": max_results},
                headers=headers,
                timeout=timeout,
            )
        except requests.RequestException as err:
            raise ToolTransportError(f"web search failed: {err}") from err
        if response.status_code != 200:
            raise ToolTransportError(f"web search returned HTTP {response.status_code}")
        return response.json().get("results", [])

    def tier_for(self, domain: str) -> SourceTier:
        return self.domain_tiers.get(domain, SourceTier.UNKNOWN)

    def search(self, query: str, max_results: int) -> list[dict]:
        import os

        api_key = os.environ.get(self.api_key_env) if self.api_key_env else None
        hits = self._transport(self.base_url, query, max_results, api_key, self.timeout)
        normalized = []
        for hit in hits[:max_results]:
            uri = hit.get("uri") or hit.get("url") or ""
            domain = hit.get("domain") or _domain_of(uri)
            normalized.append(
                {
                    "title": hit.get("title", ""),
                    "snippet": hit.get("snippet", ""),
                    "uri": uri,
                    "domain": domain,
                }
            )
        return normalized


def _domain_of(uri: str) -> str:
    from urllib.parse import urlparse

    return urlparse(uri).netloc


def keyword_query(claim: str) -> str:
    """Deterministic keyword query built from the claim's content words."""
    words = content_words(claim)
    ordered = []
    seen: set[str] = set()
    for token in tokenize(claim):
        if token in words and token not in seen:
            seen.add(token)
            ordered.append(token)
    return " ".join(ordered) if ordered else claim.strip().lower()


def render_tools_block(registry: ToolRegistry) -> str:
    return "\n".join(
        f"- {tool.id} ({tool.kind.value}): {tool.description}" for tool in registry.tools()
    )


def plan_query(
    node: ClaimNode,
    parent: ClaimNode | None,
    registry: ToolRegistry,
    backend: Backend,
) -> QueryPlan:
    """Pick a tool and query for the node's claim.

    A registry with a single search tool is a forced choice and planned
    without a backend call. Unusable backend output falls back to corpus
    search with a keyword query, flagged ``fallback=True``.
    """
    if node.state is not NodeState.VERIFYING:
        raise NodeStateError(f"node {node.id} is not verifying")
    if len(registry) == 0:
        raise InvalidInputError("tool registry is empty")

    tools = registry.tools()
    if len(tools) == 1 and tools[0].kind in (ToolKind.CORPUS_SEARCH, ToolKind.WEB_SEARCH):
        return QueryPlan(
            tool_id=tools[0].id, query=keyword_query(node.claim), origin_node=node.id
        )

    try:
        reply = backend.complete(
            PromptRole.QUERY,
            {
                "claim": node.claim,
                "parent_claim": parent.claim if parent is not None else "(none)",
                "tools": render_tools_block(registry),
            },
        )
        if registry.has(reply["tool_id"]):
            return QueryPlan(
                tool_id=reply["tool_id"], query=reply["query"], origin_node=node.id
            )
    except (SchemaValidationError, BackendError):
        pass

    fallback_tool = registry.first_of_kind(ToolKind.CORPUS_SEARCH) or tools[0]
    return QueryPlan(
        tool_id=fallback_tool.id,
        query=keyword_query(node.claim),
        origin_node=node.id,
        fallback=True,
    )


def execute(
    plan: QueryPlan, registry: ToolRegistry, max_results: int = DEFAULT_MAX_RESULTS
) -> list[RawDocument]:
    """Run the plan against its tool and return raw documents.

    The calculator returns exactly one synthetic document holding the
    evaluated value; parse or evaluation failures surface as
    EvidenceUnavailableError.
    """
    tool = registry.tool(plan.tool_id)
    impl = registry.impl(plan.tool_id)

    if tool.kind is ToolKind.CORPUS_SEARCH:
        index: CorpusIndex = impl
        docs = index.search(plan.query, limit=max_results)
        return [
            RawDocument(
                id=doc.id,
                title=doc.title,
                body=doc.body,
                tier=doc.tier,
                tool_id=tool.id,
                uri=doc.uri,
            )
            for doc in docs
        ]

    if tool.kind is ToolKind.WEB_SEARCH:
        client: WebSearchClient = impl
        hits = client.search(plan.query, max_results)
        return [
            RawDocument(
                id="web-" + hashlib.sha256(hit["uri"].encode("utf-8")).hexdigest()[:12],
                title=hit["title"],
                body=hit["snippet"],
                tier=client.tier_for(hit["domain"]),
                tool_id=tool.id,
                uri=hit["uri"],
            )
            for hit in hits
            if hit["snippet"]
        ]

    if tool.kind is ToolKind.CALCULATOR:
        calculator: Calculator = impl
        try:
            value = calculator.evaluate(plan.query)
        except CalculatorError as err:
            raise EvidenceUnavailableError(f"calculator failed: {err}") from err
        rendered = format_value(value)
        doc_id = "calc-" + hashlib.sha256(plan.query.encode("utf-8")).hexdigest()[:12]
        return [
            RawDocument(
                id=doc_id,
                title=f"calculator: {plan.query}",
                body=rendered,
                tier=CALCULATOR_TIER,
                tool_id=tool.id,
            )
        ]

    raise InvalidInputError(f"unsupported tool kind {tool.kind!r}")


def relevance_score(claim: str, snippet: str) -> float:
    """Fraction of the claim's content words present in the snippet."""
    claim_words = content_words(claim)
    if not claim_words:
        return 0.0
    return len(claim_words & content_words(snippet)) / len(claim_words)


def rerank(
    docs: list[RawDocument], claim: str, top_k: int = DEFAULT_TOP_K
) -> list[Evidence]:
    """Order documents by (tier, relevance) and keep the top ``top_k``.

    The result is a permutation plus truncation of the input: no document is
    altered or fabricated. Sorting is stable, so equal keys keep their
    original order.
    """
    evidence = [
        Evidence(
            id=doc.id,
            tool_id=doc.tool_id,
            tier=doc.tier,
            title=doc.title,
            content=doc.body,
            relevance=relevance_score(claim, doc.body),
            uri=doc.uri,
        )
        for doc in docs
    ]
    evidence.sort(key=lambda ev: (int(ev.tier), -ev.relevance))
    return evidence[:top_k]
