"""Command-line entry point tying the pipeline together.

Subcommands: ``extract``, ``verify``, ``bench curate``, ``bench stats``,
``bench eval``, ``corpus index``, ``report``. Exit codes: 0 success,
2 domain error, 3 partial/resumable run, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from . import metrics as metrics_mod
from .backend import Backend
from .config import RunConfig, build_backend, build_registry, load_config
from .corpus import index_corpus, load_corpus_jsonl
from .engine import VerifiedClaimSet, verify
from .errors import ClaimTreeError, PartialRunError
from .extraction import ExtractionStrategy, StrategyKind, extract_claims
from .tree import NodeState

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 2
EXIT_PARTIAL = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="claimtree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    extract = sub.add_parser("extract", help="extract atomic claims from a text file")
    extract.add_argument("--input", required=True, help="UTF-8 text file")
    extract.add_argument(
        "--strategy",
        default="atomic",
        choices=[kind.value for kind in StrategyKind],
    )
    extract.add_argument("--config", required=True)
    extract.add_argument("--out", required=True, help="claims JSONL output path")

    run = sub.add_parser("verify", help="verify every claim in a text file")
    run.add_argument("--input", required=True, help="UTF-8 text file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="run directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--deterministic", action="store_true")

    bench = sub.add_parser("bench", help="benchmark curation, stats, and scoring")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)

    curate = bench_sub.add_parser("curate", help="build labeled records from passages")
    curate.add_argument("--input", required=True, help="passages JSONL")
    curate.add_argument("--config", required=True)
    curate.add_argument("--out", required=True, help="dataset JSONL output path")
    curate.add_argument("--seed", type=int, default=None)
    curate.add_argument("--stats", default=None, help="also write stats JSON here")
    curate.add_argument("--falsify-count", type=int, default=1)
    curate.add_argument("--category-map", default=None, help="question-type to category JSON")

    stats = bench_sub.add_parser("stats", help="dataset statistics")
    stats.add_argument("--input", required=True, help="dataset JSONL")
    stats.add_argument("--out", required=True, help="stats JSON output path")

    evaluate = bench_sub.add_parser("eval", help="score a run against gold labels")
    evaluate.add_argument("--report", required=True, help="run report.json")
    evaluate.add_argument("--gold", required=True, help="gold JSONL")
    evaluate.add_argument("--mode", default="fixed", choices=["fixed", "matched"])
    evaluate.add_argument(
        "--k", type=int, action="append", default=None, help="repeatable; default 5 and 10"
    )
    evaluate.add_argument("--out", required=True, help="output directory")

    corpus = sub.add_parser("corpus", help="corpus management")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True, parser_class=_Parser)
    index = corpus_sub.add_parser("index", help="build a search index from corpus JSONL")
    index.add_argument("--input", required=True, help="corpus JSONL")
    index.add_argument("--out", required=True, help="index JSON output path")

    report = sub.add_parser("report", help="print the verdict table of a finished run")
    report.add_argument("--run", required=True, help="run directory")

    return parser


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ClaimTreeError(f"cannot read {path}: {err}") from err


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        config.jobs = args.jobs
    if getattr(args, "deterministic", False):
        config.deterministic = True
        config.consolidation_mode = "deterministic"
        config.jobs = 1
        config.backend.temperature = 0.0
    if getattr(args, "out", None) is not None and args.command == "verify":
        config.out_dir = args.out
    return config


def _cmd_extract(args) -> int:
    config = _load_run_config(args)
    text = _read_text(args.input)
    if not text.strip():
        raise ClaimTreeError(f"input file {args.input} contains no text")
    backend = build_backend(config)
    claims = extract_claims(text, ExtractionStrategy(kind=args.strategy), backend)
    lines = [
        json.dumps(
            {
                "text": claim.text,
                "span_start": claim.source_span[0],
                "span_end": claim.source_span[1],
                "self_contained": claim.self_contained,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        for claim in claims
    ]
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    print(f"extracted {len(claims)} claim(s) -> {args.out}")
    return EXIT_OK


def _verdict_table(result: VerifiedClaimSet) -> str:
    width = max([len(c.claim) for c in result.claims] + [5])
    width = min(width, 72)
    lines = [f"{'claim'.ljust(width)}  verdict          reason"]
    for claim in result.claims:
        text = claim.claim if len(claim.claim) <= width else claim.claim[: width - 3] + "..."
        lines.append(f"{text.ljust(width)}  {claim.state.value.ljust(15)}  {claim.reason}")
    counts = result.counts()
    lines.append(
        f"accepted={counts['accepted']} rejected={counts['rejected']} "
        f"unsubstantiated={counts['unsubstantiated']}"
    )
    return "\n".join(lines)


def _cmd_verify(args) -> int:
    config = _load_run_config(args)
    text = _read_text(args.input)
    if not text.strip():
        raise ClaimTreeError(f"input file {args.input} contains no text")
    backend = build_backend(config)
    registry = build_registry(config)
    result = verify(text, config, backend, registry)
    print(_verdict_table(result))
    print(f"run artifacts -> {config.out_dir}")
    return EXIT_OK


def _curate_backend_and_passages(args) -> tuple[RunConfig, Backend, list[dict]]:
    config = _load_run_config(args)
    backend = build_backend(config)
    passages = bench_mod.load_passages_jsonl(args.input)
    return config, backend, passages


def _cmd_bench_curate(args) -> int:
    config, backend, passages = _curate_backend_and_passages(args)
    category_map = (
        bench_mod.load_category_map(args.category_map) if args.category_map else None
    )
    records = []
    for passage in passages:
        if passage["category"]:
            category = bench_mod.Category(passage["category"])
        elif category_map and passage["question_type"]:
            category = bench_mod.map_question_type(passage["question_type"], category_map)
        else:
            raise ClaimTreeError(
                f"passage {passage['id']} has no category and no mapping applies"
            )
        seed = bench_mod.derive_record_seed(config.seed, passage["id"])
        records.append(
            bench_mod.curate(
                passage["text"],
                category,
                seed,
                backend,
                record_id=passage["id"],
                falsify_count=args.falsify_count,
            )
        )
    bench_mod.write_records_jsonl(records, args.out)
    print(f"curated {len(records)} record(s) -> {args.out}")
    if args.stats:
        data = bench_mod.stats(records).to_dict()
        Path(args.stats).write_text(
            json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"stats -> {args.stats}")
    return EXIT_OK


def _cmd_bench_stats(args) -> int:
    records = bench_mod.load_records_jsonl(args.input)
    data = bench_mod.stats(records).to_dict()
    Path(args.out).write_text(
        json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"stats over {len(records)} record(s) -> {args.out}")
    return EXIT_OK


def _cmd_bench_eval(args) -> int:
    claims = metrics_mod.load_report_claims(args.report)
    gold = metrics_mod.load_gold_jsonl(args.gold)
    alignment = metrics_mod.match_claims(claims, gold, mode=args.mode)
    ks = tuple(args.k) if args.k else metrics_mod.DEFAULT_KS
    metrics = metrics_mod.report(alignment, ks)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(metrics_mod.metrics_json(metrics), encoding="utf-8")
    (out_dir / "metrics.txt").write_text(metrics_mod.render_text(metrics), encoding="utf-8")
    print(f"metrics -> {out_dir / 'metrics.json'}")
    return EXIT_OK


def _cmd_corpus_index(args) -> int:
    documents = load_corpus_jsonl(args.input)
    index_corpus(documents, args.out)
    print(f"indexed {len(documents)} document(s) -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    report_path = Path(args.run) / "report.json"
    if not report_path.exists():
        raise ClaimTreeError(f"no report.json under {args.run}")
    data = json.loads(report_path.read_text(encoding="utf-8"))
    width = max([len(c["claim"]) for c in data["claims"]] + [5])
    width = min(width, 72)
    print(f"{'claim'.ljust(width)}  verdict          reason")
    for claim in data["claims"]:
        text = claim["claim"]
        if len(text) > width:
            text = text[: width - 3] + "..."
        state = NodeState(claim["state"]).value
        print(f"{text.ljust(width)}  {state.ljust(15)}  {claim['reason']}")
    counts = data["counts"]
    print(
        f"accepted={counts['accepted']} rejected={counts['rejected']} "
        f"unsubstantiated={counts['unsubstantiated']}"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else EXIT_USAGE

    try:
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "bench":
            if args.bench_command == "curate":
                return _cmd_bench_curate(args)
            if args.bench_command == "stats":
                return _cmd_bench_stats(args)
            return _cmd_bench_eval(args)
        if args.command == "corpus":
            return _cmd_corpus_index(args)
        return _cmd_report(args)
    except PartialRunError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    except ClaimTreeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
