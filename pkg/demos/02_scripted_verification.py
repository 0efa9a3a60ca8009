"""End-to-end verification, recorded once and replayed deterministically.

The first run drives the pipeline with a rule-based stand-in model wrapped
in a recorder. The recording becomes a scripted fixture; the second run
replays it with the scripted backend and produces identical artifacts.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from _demo_model import RuleModel

from claimtree import (
    CorpusDocument,
    CorpusIndex,
    RecordingBackend,
    SourceTier,
    Tool,
    ToolKind,
    ToolRegistry,
    scripted_backend,
    verify,
)
from claimtree.config import RunConfig

PASSAGE = (
    "Timolol lowers intraocular pressure. "
    "Latanoprost increases uveoscleral outflow. "
    "Untreated glaucoma preserves vision indefinitely."
)

DOCUMENTS = [
    CorpusDocument("d1", "Beta blockers", "Timolol lowers intraocular pressure.", SourceTier.PEER_REVIEWED),
    CorpusDocument("d2", "Prostaglandins", "Latanoprost increases uveoscleral outflow.", SourceTier.TEXTBOOK),
    CorpusDocument("d3", "Natural history", "Evidence contradicts: untreated glaucoma preserves vision indefinitely.", SourceTier.PEER_REVIEWED),
]


def build_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(
        Tool("corpus", ToolKind.CORPUS_SEARCH, "local document search"),
        CorpusIndex.build(DOCUMENTS),
    )
    return registry


with tempfile.TemporaryDirectory() as tmp:
    fixture_path = Path(tmp) / "fixture.json"

    # Run 1: record the rule model's traffic.
    recorder = RecordingBackend(RuleModel())
    config = RunConfig()
    config.out_dir = str(Path(tmp) / "run-recorded")
    result = verify(PASSAGE, config, recorder, build_registry())
    recorder.save_fixture(fixture_path)
    print("recorded run verdicts:")
    for claim in result.claims:
        print(f"  {claim.state.value:15s} {claim.claim}")
    print(f"fixture entries recorded: {len(recorder.entries)}")

    # Run 2: replay offline from the fixture alone.
    config2 = RunConfig()
    config2.out_dir = str(Path(tmp) / "run-replayed")
    replayed = verify(PASSAGE, config2, scripted_backend(fixture_path), build_registry())

    original = (Path(tmp) / "run-recorded" / "tree.json").read_bytes()
    replay = (Path(tmp) / "run-replayed" / "tree.json").read_bytes()
    print(f"replayed tree.json byte-identical: {original == replay}")
    print(f"evidence items stored: {sorted(replayed.evidence)}")
