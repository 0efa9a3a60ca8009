"""Claim verification over adaptive trees, plus benchmark curation and scoring.

The package decomposes long-form text into self-contained atomic claims,
verifies each claim against retrieved evidence inside a budget-bounded
verification tree (spanning downward when evidence is insufficient,
consolidating verdicts upward), and ships the tooling around that core:
a benchmark falsification pipeline and a metrics harness.
"""

from .backend import (
    Backend,
    BackendConfig,
    HttpBackend,
    PromptRole,
    RecordingBackend,
    ScriptedBackend,
    scripted_backend,
    scripted_entry,
)
from .bench import (
    BenchRecord,
    Category,
    DatasetStats,
    PerturbationMeta,
    PerturbationOperator,
    curate,
    falsify,
    stats,
)
from .calculator import Calculator, evaluate
from .config import RunConfig, build_backend, build_registry, load_config
from .corpus import CorpusDocument, CorpusIndex, SourceTier, index_corpus, load_corpus_jsonl
from .engine import (
    LeafDecision,
    LeafVerdict,
    VerifiedClaim,
    VerifiedClaimSet,
    consolidate,
    span_subtree,
    verify,
    verify_leaf,
)
from .extraction import (
    ExtractedClaim,
    ExtractionStrategy,
    StrategyKind,
    decontextualize,
    extract_claims,
)
from .metrics import (
    Alignment,
    GoldLabel,
    MetricsReport,
    accuracy,
    f1_at_k,
    match_claims,
    report,
)
from .retrieval import (
    Evidence,
    QueryPlan,
    Tool,
    ToolKind,
    ToolRegistry,
    WebSearchClient,
    execute,
    plan_query,
    rerank,
)
from .tree import (
    ClaimNode,
    EvidenceRef,
    NodeState,
    SpanBudget,
    VerificationTree,
    add_children,
    consolidation_ready,
    finalize,
    load,
    new_tree,
    save,
)

__version__ = "0.1.0"
