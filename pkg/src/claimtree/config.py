"""Run configuration: a single nested JSON document plus builders.

Secrets never appear in a config: backends and web tools name the
environment variable holding their key, and the variable is resolved only
at call time. Seeds are recorded verbatim so a run can be replayed from its
``run.json`` alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backend import Backend, BackendConfig, HttpBackend, ScriptedBackend
from .calculator import Calculator
from .corpus import CorpusIndex, load_corpus_jsonl
from .errors import InvalidInputError
from .retrieval import Tool, ToolKind, ToolRegistry, WebSearchClient, load_domain_tiers

RUN_SCHEMA_VERSION = "1"


@dataclass
class BackendSpec:
    """Which backend to construct: ``scripted`` replay or ``http``."""

    kind: str = "scripted"
    fixture_path: str | None = None
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    max_retries: int = 2
    timeout: float = 30.0
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "http"):
            raise InvalidInputError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not (self.endpoint and self.model):
            raise InvalidInputError("http backend requires endpoint and model")


@dataclass
class ToolSpec:
    """One retrieval tool to register, with its data sources."""

    id: str
    kind: str
    description: str = ""
    index_path: str | None = None
    corpus_path: str | None = None
    base_url: str | None = None
    api_key_env: str | None = None
    domain_tier_path: str | None = None

    def __post_init__(self) -> None:
        kind = ToolKind(self.kind)
        if kind is ToolKind.CORPUS_SEARCH and not (self.index_path or self.corpus_path):
            raise InvalidInputError(
                f"corpus tool {self.id!r} requires index_path or corpus_path"
            )
        if kind is ToolKind.WEB_SEARCH and not self.base_url:
            raise InvalidInputError(f"web tool {self.id!r} requires base_url")


@dataclass
class RunConfig:
    """Everything a verification run needs, fully serializable."""

    backend: BackendSpec = field(default_factory=BackendSpec)
    budget: dict = field(
        default_factory=lambda: {
            "max_depth": 3,
            "max_children_per_node": 5,
            "max_total_nodes": 64,
        }
    )
    tools: list[ToolSpec] = field(default_factory=list)
    rerank_top_k: int = 5
    max_results: int = 8
    consolidation_mode: str = "deterministic"
    consolidate_with_parent_evidence: bool = False
    extraction_strategy: str = "atomic"
    seed: int = 0
    jobs: int = 1
    deterministic: bool = False
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.consolidation_mode not in ("deterministic", "llm"):
            raise InvalidInputError(
                f"unknown consolidation mode {self.consolidation_mode!r}"
            )
        if self.jobs < 1:
            raise InvalidInputError("jobs must be >= 1")
        if self.deterministic:
            self.consolidation_mode = "deterministic"
            self.jobs = 1
            self.backend.temperature = 0.0

    def span_budget(self):
        from .tree import SpanBudget

        return SpanBudget(**self.budget)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["schema_version"] = RUN_SCHEMA_VERSION
        return data


def load_config(path: str | Path) -> RunConfig:
    """Parse a config file and check that every referenced path exists."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise InvalidInputError(f"cannot read config {path}: {err}") from err
    return config_from_dict(raw, base_dir=Path(path).parent)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    raw = dict(raw)
    raw.pop("schema_version", None)
    backend = BackendSpec(**raw.pop("backend", {}))
    tools = [ToolSpec(**spec) for spec in raw.pop("tools", [])]
    try:
        config = RunConfig(backend=backend, tools=tools, **raw)
    except TypeError as err:
        raise InvalidInputError(f"bad config field: {err}") from err

    missing = []
    for label, rel in _referenced_paths(config):
        resolved = _resolve(rel, base_dir)
        if not resolved.exists():
            missing.append(f"{label}: {rel}")
        else:
            _assign_path(config, label, str(resolved))
    if missing:
        raise InvalidInputError("config references missing paths: " + "; ".join(missing))
    return config


def _referenced_paths(config: RunConfig):
    if config.backend.fixture_path:
        yield "backend.fixture_path", config.backend.fixture_path
    for i, tool in enumerate(config.tools):
        if tool.index_path:
            yield f"tools[{i}].index_path", tool.index_path
        if tool.corpus_path:
            yield f"tools[{i}].corpus_path", tool.corpus_path
        if tool.domain_tier_path:
            yield f"tools[{i}].domain_tier_path", tool.domain_tier_path


def _resolve(rel: str, base_dir: Path | None) -> Path:
    path = Path(rel)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return path


def _assign_path(config: RunConfig, label: str, value: str) -> None:
    if label == "backend.fixture_path":
        config.backend.fixture_path = value
        return
    idx = int(label.split("[")[1].split("]")[0])
    attr = label.split(".")[1]
    setattr(config.tools[idx], attr, value)


def build_backend(config: RunConfig) -> Backend:
    spec = config.backend
    if spec.kind == "scripted":
        if not spec.fixture_path:
            raise InvalidInputError("scripted backend requires fixture_path")
        return ScriptedBackend.from_file(spec.fixture_path)
    return HttpBackend(
        BackendConfig(
            endpoint=spec.endpoint,
            model=spec.model,
            api_key_env=spec.api_key_env,
            max_retries=spec.max_retries,
            timeout=spec.timeout,
            temperature=spec.temperature,
        )
    )


def build_registry(config: RunConfig) -> ToolRegistry:
    registry = ToolRegistry()
    for spec in config.tools:
        kind = ToolKind(spec.kind)
        tool = Tool(id=spec.id, kind=kind, description=spec.description)
        if kind is ToolKind.CORPUS_SEARCH:
            if spec.index_path:
                impl = CorpusIndex.load(spec.index_path)
            else:
                impl = CorpusIndex.build(load_corpus_jsonl(spec.corpus_path))
        elif kind is ToolKind.WEB_SEARCH:
            tiers = (
                load_domain_tiers(spec.domain_tier_path)
                if spec.domain_tier_path
                else None
            )
            impl = WebSearchClient(
                base_url=spec.base_url,
                api_key_env=spec.api_key_env,
                domain_tiers=tiers,
            )
        else:
            impl = Calculator()
        registry.register(tool, impl)
    return registry
