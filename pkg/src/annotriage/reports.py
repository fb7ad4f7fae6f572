"""Shape run records into the JSON/CSV reports the CLI writes.

The evaluation report mirrors the usual benchmark layout: one row per
annotator configuration (backend x prompt variant x temperature x run) with
per-pair breakdowns, plus rows averaging the repeated runs of each
configuration.
"""

from __future__ import annotations

import io
from typing import Mapping, Sequence

from .aggregation import SimilarityMatrix, VoteResult, panel_from_records, relindex_vote
from .costing import (
    REFERENCE_COST_NOTE,
    REFERENCE_SINGLE_ANNOTATOR_COST,
    CostEstimate,
    PricingModel,
    UsageStats,
    estimate_cost,
    human_baseline,
)
from .dataset import Dataset
from .metrics import (
    LabelVector,
    MetricReport,
    average_runs,
    cohen_kappa,
    evaluate,
    fleiss_kappa,
    paired_ttest,
    ratings_matrix,
)
from .parsing import AnnotationRecord
from .runstore import RunManifest, RunTotals


class ReportError(ValueError):
    pass


def records_vector(records: Sequence[AnnotationRecord], dataset: Dataset) -> LabelVector:
    """Outcomes aligned to dataset instance order."""
    by_id = {record.instance_id: record.parsed for record in records}
    ids = [inst.id for inst in dataset.instances if inst.id in by_id]
    missing = set(by_id) - set(ids)
    if missing:
        raise ReportError(f"records reference unknown instances: {sorted(missing)[:5]}")
    return LabelVector(ids=tuple(ids), outcomes=tuple(by_id[i] for i in ids))


def evaluation_report(
    runs: Sequence[tuple[RunManifest, Sequence[AnnotationRecord]]],
    dataset: Dataset,
    mode: str,
) -> dict:
    rows = []
    grouped: dict[tuple[str, str, float], list[tuple[int, MetricReport]]] = {}
    for manifest, records in runs:
        report = evaluate(records_vector(records, dataset), dataset, mode)
        rows.append(
            {
                "backend": manifest.backend["name"],
                "variant": manifest.variant,
                "temperature": manifest.temperature,
                "run_index": manifest.run_index,
                **report.to_dict(),
            }
        )
        key = (manifest.backend["name"], manifest.variant, manifest.temperature)
        grouped.setdefault(key, []).append((manifest.run_index, report))
    averaged = []
    means: dict[tuple[str, str, float], MetricReport] = {}
    for (backend, variant, temperature), entries in sorted(grouped.items()):
        entries.sort(key=lambda e: e[0])
        mean = average_runs([report for _, report in entries])
        means[(backend, variant, temperature)] = mean
        averaged.append(
            {
                "backend": backend,
                "variant": variant,
                "temperature": temperature,
                "runs": [run_index for run_index, _ in entries],
                **mean.to_dict(),
            }
        )
    return {
        "mode": mode,
        "rows": rows,
        "averaged": averaged,
        "significance": _temperature_significance(means),
    }


def _temperature_significance(
    means: Mapping[tuple[str, str, float], MetricReport], alpha: float = 0.05
) -> list[dict]:
    """Two-tailed paired t-tests on per-pair averaged metrics across temperatures."""
    tests = []
    by_setting: dict[tuple[str, str], list[float]] = {}
    for backend, variant, temperature in means:
        by_setting.setdefault((backend, variant), []).append(temperature)
    for (backend, variant), temperatures in sorted(by_setting.items()):
        if len(temperatures) < 2:
            continue
        temperatures.sort()
        for low, high in zip(temperatures, temperatures[1:]):
            a, b = means[(backend, variant, low)], means[(backend, variant, high)]
            pairs = sorted(a.per_pair)
            if len(pairs) < 2 or sorted(b.per_pair) != pairs:
                continue
            f1_test = paired_ttest(
                [a.per_pair[p].micro_f1 for p in pairs],
                [b.per_pair[p].micro_f1 for p in pairs],
                alpha,
            )
            acc_test = paired_ttest(
                [a.per_pair[p].accuracy for p in pairs],
                [b.per_pair[p].accuracy for p in pairs],
                alpha,
            )
            tests.append(
                {
                    "backend": backend,
                    "variant": variant,
                    "temperatures": [low, high],
                    "alpha": alpha,
                    "micro_f1": f1_test.to_dict(),
                    "accuracy": acc_test.to_dict(),
                }
            )
    return tests


def agreement_report(
    runs: Sequence[tuple[RunManifest, Sequence[AnnotationRecord]]], dataset: Dataset
) -> dict:
    """Pairwise Cohen kappa for every run pair; Fleiss kappa over all runs."""
    if len(runs) < 2:
        raise ReportError("agreement needs at least two runs")
    vectors = []
    names = []
    for manifest, records in runs:
        vectors.append(records_vector(records, dataset))
        names.append(manifest.run_id)
    ids = vectors[0].ids
    if any(v.ids != ids for v in vectors):
        raise ReportError("runs cover different instance sets")
    pairwise = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            pairwise.append(
                {
                    "a": names[i],
                    "b": names[j],
                    "cohen_kappa": cohen_kappa(vectors[i], vectors[j]),
                }
            )
    return {
        "pairwise": pairwise,
        "fleiss_kappa": fleiss_kappa(ratings_matrix(vectors)),
    }


def aggregate_votes(
    record_sets: Sequence[Sequence[AnnotationRecord]],
    dataset: Dataset,
    similarities: Mapping[str, SimilarityMatrix] | None = None,
) -> list[VoteResult]:
    """Similarity-weighted vote per instance, in dataset order."""
    panels = panel_from_records(record_sets)
    votes = []
    for instance in dataset.instances:
        panel = panels.get(instance.id)
        if panel is None:
            continue
        schema = dataset.schema_for(instance)
        sim = None
        if similarities is not None:
            sim = similarities.get(instance.pair_type)
        if sim is None:
            sim = SimilarityMatrix.identity(instance.pair_type, schema.labels)
        annotators = [annotator for annotator, _ in panel]
        outcomes = [outcome for _, outcome in panel]
        votes.append(relindex_vote(instance.id, outcomes, sim, annotators))
    return votes


def curve_csv(points: Sequence[tuple[float, float]]) -> str:
    out = io.StringIO()
    out.write("coverage,accuracy\n")
    for coverage, accuracy in points:
        out.write(f"{coverage:.6g},{accuracy:.6g}\n")
    return out.getvalue()


def cost_report(
    totals: RunTotals | None,
    pricing: PricingModel,
    stats: UsageStats | None = None,
    human_seconds: float = 45.0,
    human_wage: float = 7.25,
) -> dict:
    """Cost summary for one run (from manifest totals) or explicit averages."""
    if (totals is None) == (stats is None):
        raise ReportError("pass exactly one of totals or stats")
    if totals is not None:
        n = totals.instances
        if pricing.kind == "per_char":
            avg_in = totals.input_chars / n if n else 0.0
            avg_out = totals.output_chars / n if n else 0.0
        else:
            avg_in = totals.input_tokens / n if n else 0.0
            avg_out = totals.output_tokens / n if n else 0.0
        stats = UsageStats(
            n_instances=n,
            avg_input_units=avg_in,
            avg_output_units=avg_out,
            avg_seconds=totals.wall_seconds / n if n else 0.0,
        )
    estimate: CostEstimate = estimate_cost(stats, pricing)
    baseline_cost = human_baseline(stats.n_instances, human_seconds, human_wage)
    baseline: dict = {
        "n_instances": stats.n_instances,
        "seconds_per_instance": human_seconds,
        "hourly_wage": human_wage,
        "cost": baseline_cost,
    }
    if (stats.n_instances, human_seconds, human_wage) == (3598, 45.0, 7.25):
        baseline["reference_estimate"] = REFERENCE_SINGLE_ANNOTATOR_COST
        baseline["note"] = REFERENCE_COST_NOTE
    return {
        "pricing": pricing.name,
        "stats": {
            "n_instances": stats.n_instances,
            "avg_input_units": stats.avg_input_units,
            "avg_output_units": stats.avg_output_units,
            "avg_seconds": stats.avg_seconds,
        },
        "estimate": estimate.to_dict(),
        "human_baseline": baseline,
    }
