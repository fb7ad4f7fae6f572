"""Command-line entry point.

Subcommands cover the full workflow: annotate -> evaluate / agreement ->
aggregate -> curve -> triage -> serve -> export, plus cost estimation.
Exit codes: 0 success, 1 validation problem, 2 transport failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import reports
from .aggregation import AggregationError, coverage_curve, load_similarity, triage
from .backends import ConfigurationError, TransportError, run_annotation, run_id_for
from .config import AppConfig, ConfigError, load_config
from .costing import (
    CostingError,
    UsageStats,
    load_pricing,
    pricing_by_name,
)
from .dataset import Dataset, DatasetError, dataset_fingerprint, load_dataset
from .metrics import MetricsError
from .parsing import load_style_lexicon
from .prompting import ExemplarBank, PromptError, PromptVariant, load_compositions
from .review import ReviewError, ReviewQueue, build_review_items, write_queue
from .runstore import RunStore, RunStoreError

VALIDATION_ERRORS = (
    DatasetError,
    PromptError,
    ConfigError,
    ConfigurationError,
    AggregationError,
    MetricsError,
    CostingError,
    RunStoreError,
    ReviewError,
    reports.ReportError,
    ValueError,
)


def _load_environment(args) -> tuple[AppConfig, Dataset]:
    config = load_config(args.config)
    dataset = load_dataset(config.dataset, config.schemas)
    return config, dataset


def _exemplar_bank(config: AppConfig) -> ExemplarBank | None:
    return ExemplarBank.from_file(config.exemplars) if config.exemplars else None


def _open_runs(run_dirs, config: AppConfig, fingerprint: str):
    """Load (manifest, records) per run dir; incomplete or mismatched runs fail."""
    runs = []
    for run_dir in run_dirs:
        store = RunStore(run_dir)
        manifest = store.load_manifest()
        if manifest.dataset_fingerprint and manifest.dataset_fingerprint != fingerprint:
            raise RunStoreError(
                f"{run_dir}: run was produced from a different dataset file "
                f"(fingerprint {manifest.dataset_fingerprint[:12]}... != {fingerprint[:12]}...)"
            )
        runs.append((manifest, store.load_records()))
    return runs


def _write_json(path: str | Path | None, payload: dict) -> None:
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_annotate(args) -> int:
    config, dataset = _load_environment(args)
    backend = config.backend(args.backend)
    if args.temperature is not None:
        backend = replace(backend, temperature=args.temperature)
    variant = PromptVariant(args.variant)
    seed = args.seed if args.seed is not None else (backend.seed or 0)
    run_dir = (
        Path(args.out)
        if args.out
        else config.runs_dir / run_id_for(backend, variant, args.run_index, seed)
    )
    store = RunStore(run_dir)
    lexicon = load_style_lexicon(config.style_lexicon) if config.style_lexicon else None
    compositions = (
        load_compositions(config.compositions) if config.compositions else None
    )
    manifest = run_annotation(
        dataset,
        _exemplar_bank(config),
        backend,
        variant,
        args.run_index,
        store,
        seed=seed,
        dataset_fingerprint=dataset_fingerprint(config.dataset),
        lexicon=lexicon,
        compositions=compositions,
    )
    print(f"run {manifest.run_id}: {manifest.totals.instances} records -> {run_dir}")
    return 0


def cmd_evaluate(args) -> int:
    config, dataset = _load_environment(args)
    runs = _open_runs(args.runs, config, dataset_fingerprint(config.dataset))
    report = reports.evaluation_report(runs, dataset, args.mode)
    _write_json(args.out, report)
    return 0


def cmd_agreement(args) -> int:
    config, dataset = _load_environment(args)
    runs = _open_runs(args.runs, config, dataset_fingerprint(config.dataset))
    _write_json(args.out, reports.agreement_report(runs, dataset))
    return 0


def cmd_aggregate(args) -> int:
    config, dataset = _load_environment(args)
    runs = _open_runs(args.runs, config, dataset_fingerprint(config.dataset))
    similarities = None
    similarity_path = args.similarity or config.similarity
    if similarity_path:
        labels = {pair: schema.labels for pair, schema in dataset.schemas.items()}
        similarities = load_similarity(similarity_path, labels)
    votes = reports.aggregate_votes([records for _, records in runs], dataset, similarities)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for vote in votes:
            f.write(json.dumps(vote.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    print(f"{len(votes)} votes -> {out}")
    return 0


def _load_votes(path: str | Path):
    from .aggregation import VoteResult

    votes = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                votes.append(VoteResult.from_dict(json.loads(line)))
    return votes


def cmd_curve(args) -> int:
    config, dataset = _load_environment(args)
    votes = _load_votes(args.votes)
    gold = {
        inst.id: inst.gold_label for inst in dataset.instances if inst.gold_label is not None
    }
    if args.steps:
        steps = [float(s) for s in args.steps.split(",")]
    else:
        count = round(1.0 / args.step_size)
        steps = [round((i + 1) * args.step_size, 10) for i in range(count)]
    points = coverage_curve(votes, gold, steps)
    csv_text = reports.curve_csv(points)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_triage(args) -> int:
    config, dataset = _load_environment(args)
    votes = _load_votes(args.votes)
    split = triage(votes, threshold=args.threshold, coverage=args.coverage)
    by_id = {vote.instance_id: vote for vote in votes}
    items = build_review_items(dataset, by_id, split.expert_queue)
    auto_labels = {instance_id: by_id[instance_id].selected for instance_id in split.auto}
    out = Path(args.out)
    write_queue(out, items, split, auto_labels)
    split_path = out / "triage.json"
    _write_json(split_path, split.to_dict())
    print(
        f"triage: {len(split.auto)} auto-accepted, {len(split.expert_queue)} queued -> {out}"
    )
    return 0


def cmd_cost(args) -> int:
    extra = None
    if args.config:
        config = load_config(args.config)
        if config.pricing:
            extra = load_pricing(config.pricing)
    pricing = pricing_by_name(args.pricing, extra)
    totals = None
    stats = None
    if args.run:
        totals = RunStore(args.run).load_manifest().totals
    else:
        if not args.stats:
            raise CostingError("pass --run or --stats n,avg_in,avg_out,avg_seconds")
        n, avg_in, avg_out, avg_seconds = (float(x) for x in args.stats.split(","))
        stats = UsageStats(
            n_instances=int(n),
            avg_input_units=avg_in,
            avg_output_units=avg_out,
            avg_seconds=avg_seconds,
        )
    report = reports.cost_report(
        totals,
        pricing,
        stats=stats,
        human_seconds=args.human_seconds,
        human_wage=args.human_wage,
    )
    _write_json(args.out, report)
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    queue = ReviewQueue(args.queue)
    serve(queue, host=args.host, port=args.port, ui_dir=args.ui)
    return 0


def cmd_export(args) -> int:
    queue = ReviewQueue(args.queue)
    text = queue.export_jsonl()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annotriage",
        description="LLM annotation runs, reliability-weighted aggregation, and expert triage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    annotate = sub.add_parser("annotate", help="run one backend x variant pass over the dataset")
    annotate.add_argument("--config", required=True)
    annotate.add_argument("--backend", required=True)
    annotate.add_argument("--variant", required=True, choices=[v.value for v in PromptVariant])
    annotate.add_argument("--temp", dest="temperature", type=float, default=None)
    annotate.add_argument("--seed", type=int, default=None)
    annotate.add_argument("--run-index", type=int, default=1)
    annotate.add_argument("--out", default=None, help="run directory (default: runs_dir/run_id)")
    annotate.set_defaults(func=cmd_annotate)

    evaluate = sub.add_parser("evaluate", help="score runs against expert gold labels")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--runs", nargs="+", required=True, help="run directories")
    evaluate.add_argument(
        "--mode", choices=["all_classes", "exclude_no_relation"], default="all_classes"
    )
    evaluate.add_argument("--out", default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    agreement = sub.add_parser("agreement", help="inter-annotator agreement between runs")
    agreement.add_argument("--config", required=True)
    agreement.add_argument("--runs", nargs="+", required=True)
    agreement.add_argument("--out", default=None)
    agreement.set_defaults(func=cmd_agreement)

    aggregate = sub.add_parser("aggregate", help="similarity-weighted voting over runs")
    aggregate.add_argument("--config", required=True)
    aggregate.add_argument("--runs", nargs="+", required=True)
    aggregate.add_argument("--similarity", default=None)
    aggregate.add_argument("--out", required=True, help="votes JSONL file")
    aggregate.set_defaults(func=cmd_aggregate)

    curve = sub.add_parser("curve", help="coverage-accuracy curve from votes")
    curve.add_argument("--config", required=True)
    curve.add_argument("--votes", required=True)
    curve.add_argument("--steps", default=None, help="comma-separated coverage fractions")
    curve.add_argument("--step-size", type=float, default=0.05)
    curve.add_argument("--out", default=None)
    curve.set_defaults(func=cmd_curve)

    triage_cmd = sub.add_parser("triage", help="split votes into auto labels and a review queue")
    triage_cmd.add_argument("--config", required=True)
    triage_cmd.add_argument("--votes", required=True)
    triage_cmd.add_argument("--threshold", type=float, default=None)
    triage_cmd.add_argument("--coverage", type=float, default=None)
    triage_cmd.add_argument("--out", required=True, help="review queue directory")
    triage_cmd.set_defaults(func=cmd_triage)

    cost = sub.add_parser("cost", help="cost/time estimate for a run or explicit averages")
    cost.add_argument("--config", default=None)
    cost.add_argument("--run", default=None, help="run directory")
    cost.add_argument("--stats", default=None, help="n,avg_in,avg_out,avg_seconds")
    cost.add_argument("--pricing", required=True)
    cost.add_argument("--human-seconds", type=float, default=45.0)
    cost.add_argument("--human-wage", type=float, default=7.25)
    cost.add_argument("--out", default=None)
    cost.set_defaults(func=cmd_cost)

    serve = sub.add_parser("serve", help="serve the review API and UI")
    serve.add_argument("--queue", required=True, help="review queue directory")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--ui", default=None, help="static UI asset directory")
    serve.set_defaults(func=cmd_serve)

    export = sub.add_parser("export", help="merged final labels (expert overrides win)")
    export.add_argument("--queue", required=True)
    export.add_argument("--out", default=None)
    export.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
