"""Combine multiple annotators' outcomes per instance.

Raw majority voting picks the most frequent label; similarity-weighted
voting scores every candidate label by its mean expert-declared similarity
to the panel's assessments, keeping both the winning label (the argmax) and
the winning confidence (the reliability index used for triage).

Vote handling is shared by both schemes: a blank contributes nothing but
still divides the panel size, and a hallucination counts only through its
canonical relation style when that style is itself a schema label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .parsing import AnnotationRecord, ParsedLabel


class AggregationError(ValueError):
    """Vote inputs violate a precondition."""


@dataclass(frozen=True)
class SimilarityMatrix:
    """Expert-declared label-label similarity for one entity-pair type."""

    pair_type: str
    labels: tuple[str, ...]
    values: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for (a, b), value in self.values.items():
            if a not in self.labels or b not in self.labels:
                raise AggregationError(
                    f"similarity for {self.pair_type}: unknown label in ({a!r}, {b!r})"
                )
            if not 0.0 <= value <= 1.0:
                raise AggregationError(
                    f"similarity for {self.pair_type}: sim({a},{b})={value} outside [0,1]"
                )
            if a == b and value != 1.0:
                raise AggregationError(
                    f"similarity for {self.pair_type}: sim({a},{a}) must be 1"
                )
            opposite = self.values.get((b, a))
            if opposite is not None and opposite != value:
                raise AggregationError(
                    f"similarity for {self.pair_type}: sim({a},{b}) asymmetric"
                )

    @classmethod
    def identity(cls, pair_type: str, labels: Sequence[str]) -> "SimilarityMatrix":
        return cls(pair_type=pair_type, labels=tuple(labels))

    def value(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        direct = self.values.get((a, b))
        if direct is not None:
            return direct
        return self.values.get((b, a), 0.0)


def load_similarity(
    path: str | Path, schema_labels: Mapping[str, Sequence[str]] | None = None
) -> dict[str, SimilarityMatrix]:
    """Load pair_type -> label -> label -> value, validated against schema labels."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    matrices = {}
    for pair_type, table in raw.items():
        if schema_labels is not None and pair_type not in schema_labels:
            raise AggregationError(f"similarity file names unknown pair type {pair_type!r}")
        labels = (
            tuple(schema_labels[pair_type])
            if schema_labels is not None
            else tuple(sorted(table))
        )
        values = {}
        for a, row in table.items():
            for b, value in row.items():
                values[(a, b)] = float(value)
        matrices[pair_type] = SimilarityMatrix(pair_type=pair_type, labels=labels, values=values)
    return matrices


@dataclass(frozen=True)
class VoteResult:
    """Aggregated outcome of one instance's annotator panel."""

    instance_id: str
    confid: Mapping[str, float]
    selected: str
    rel_index: float
    assessments: tuple[tuple[str, ParsedLabel], ...]

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "confid": {label: value for label, value in sorted(self.confid.items())},
            "selected": self.selected,
            "rel_index": self.rel_index,
            "assessments": [
                {"annotator": annotator, "outcome": outcome.to_dict()}
                for annotator, outcome in self.assessments
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "VoteResult":
        return cls(
            instance_id=data["instance_id"],
            confid=dict(data["confid"]),
            selected=data["selected"],
            rel_index=float(data["rel_index"]),
            assessments=tuple(
                (entry["annotator"], ParsedLabel.from_dict(entry["outcome"]))
                for entry in data["assessments"]
            ),
        )


@dataclass(frozen=True)
class TriageSplit:
    """Partition into auto-accepted ids and the expert review queue."""

    auto: tuple[str, ...]
    expert_queue: tuple[str, ...]  # ascending rel_index, then id

    def to_dict(self) -> dict:
        return {"auto": list(self.auto), "expert_queue": list(self.expert_queue)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TriageSplit":
        return cls(auto=tuple(data["auto"]), expert_queue=tuple(data["expert_queue"]))


def effective_label(outcome: ParsedLabel, labels: Sequence[str]) -> str | None:
    """The schema label an outcome supports, or None for unusable votes."""
    if outcome.is_label:
        return outcome.label
    if outcome.kind == "hallucination" and outcome.style in labels:
        return outcome.style
    return None


def majority_vote(outcomes: Sequence[ParsedLabel], labels: Sequence[str] | None = None) -> tuple[str, int]:
    """Most frequent label with deterministic lexicographic tie-break.

    ``labels`` restricts which hallucination styles can count as votes; when
    omitted, any label outcome counts and hallucination styles never do.
    """
    if not outcomes:
        raise AggregationError("no outcomes to vote on")
    counts: dict[str, int] = {}
    for outcome in outcomes:
        effective = (
            effective_label(outcome, labels) if labels is not None
            else (outcome.label if outcome.is_label else None)
        )
        if effective is not None:
            counts[effective] = counts.get(effective, 0) + 1
    if not counts:
        raise AggregationError("no usable votes (all outcomes blank or unmapped)")
    best = max(counts.values())
    winner = min(label for label, count in counts.items() if count == best)
    return winner, best


def relindex_vote(
    instance_id: str,
    outcomes: Sequence[ParsedLabel],
    sim: SimilarityMatrix,
    annotators: Sequence[str] | None = None,
) -> VoteResult:
    """Similarity-weighted vote over K assessments.

    confid(l) is the mean over annotators of sim(assessment, l); the selected
    label is the argmax and the reliability index is the max confidence.
    """
    if not outcomes:
        raise AggregationError(f"instance {instance_id}: no outcomes to vote on")
    if annotators is None:
        annotators = tuple(f"annotator{i}" for i in range(1, len(outcomes) + 1))
    if len(annotators) != len(outcomes):
        raise AggregationError("annotators and outcomes must align")
    k = len(outcomes)
    effectives = []
    for outcome in outcomes:
        if outcome.is_label and outcome.label not in sim.labels:
            raise AggregationError(
                f"instance {instance_id}: outcome label {outcome.label!r} not in "
                f"similarity matrix for {sim.pair_type}"
            )
        effectives.append(effective_label(outcome, sim.labels))
    confid = {}
    for label in sim.labels:
        total = 0.0
        for effective in effectives:
            if effective is not None:
                total += sim.value(effective, label)
        confid[label] = total / k
    rel_index = max(confid.values())
    selected = min(label for label, value in confid.items() if value == rel_index)
    return VoteResult(
        instance_id=instance_id,
        confid=confid,
        selected=selected,
        rel_index=rel_index,
        assessments=tuple(zip(annotators, outcomes)),
    )


def panel_from_records(
    record_sets: Sequence[Sequence[AnnotationRecord]],
) -> dict[str, list[tuple[str, ParsedLabel]]]:
    """Group per-annotator records into per-instance panels.

    Each record set is one annotator's full pass; every instance must appear
    in every set so panels stay rectangular.
    """
    if not record_sets:
        raise AggregationError("no record sets")
    panels: dict[str, list[tuple[str, ParsedLabel]]] = {}
    for records in record_sets:
        for record in records:
            panels.setdefault(record.instance_id, []).append((record.annotator, record.parsed))
    sizes = {len(votes) for votes in panels.values()}
    if len(sizes) > 1:
        raise AggregationError("record sets do not cover the same instances")
    return panels


def coverage_curve(
    votes: Sequence[VoteResult],
    gold: Mapping[str, str],
    steps: Sequence[float],
) -> list[tuple[float, float]]:
    """Accuracy over the top-p fraction of votes ordered by descending rel_index."""
    if not votes:
        raise AggregationError("no votes to curve")
    for step in steps:
        if not 0.0 < step <= 1.0:
            raise AggregationError(f"coverage step {step} outside (0, 1]")
    missing = [v.instance_id for v in votes if v.instance_id not in gold]
    if missing:
        raise AggregationError(f"missing gold labels for: {', '.join(missing[:5])}")
    ordered = sorted(votes, key=lambda v: (-v.rel_index, v.instance_id))
    correct_prefix = []
    running = 0
    for vote in ordered:
        running += int(vote.selected == gold[vote.instance_id])
        correct_prefix.append(running)
    n = len(ordered)
    points = []
    for step in steps:
        top = math.ceil(step * n)
        points.append((step, correct_prefix[top - 1] / top))
    return points


def triage(
    votes: Sequence[VoteResult],
    threshold: float | None = None,
    coverage: float | None = None,
) -> TriageSplit:
    """Split votes into auto-accepted and expert-review ids.

    Exactly one policy applies: a rel_index threshold, or a coverage fraction
    keeping the top share of the panel by reliability.
    """
    if (threshold is None) == (coverage is None):
        raise AggregationError("pass exactly one of threshold or coverage")
    ordered = sorted(votes, key=lambda v: (-v.rel_index, v.instance_id))
    if threshold is not None:
        if not 0.0 <= threshold <= 1.0:
            raise AggregationError(f"threshold {threshold} outside [0, 1]")
        auto = [v.instance_id for v in ordered if v.rel_index >= threshold]
        queued = [v for v in ordered if v.rel_index < threshold]
    else:
        if not 0.0 < coverage <= 1.0:
            raise AggregationError(f"coverage {coverage} outside (0, 1]")
        cut = math.ceil(coverage * len(ordered))
        auto = [v.instance_id for v in ordered[:cut]]
        queued = ordered[cut:]
    expert_queue = tuple(
        v.instance_id for v in sorted(queued, key=lambda v: (v.rel_index, v.instance_id))
    )
    return TriageSplit(auto=tuple(auto), expert_queue=expert_queue)
