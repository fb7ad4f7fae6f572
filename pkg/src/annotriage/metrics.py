"""Agreement and quality metrics for annotator outputs.

Kappa computations treat every canonical label as its own category and keep
blank and hallucination as two extra categories: two annotators both
abstaining is genuine agreement.

Micro-F1 pools TP/FP/FN within each entity pair. Invalid predictions follow
a fixed convention: a blank contributes a false negative only (nothing was
predicted), a hallucination contributes both a false positive and a false
negative (something off-inventory was predicted). With only valid labels and
all classes pooled this makes micro-F1 equal accuracy exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .dataset import Dataset
from .parsing import BLANK, HALLUCINATION, AnnotationRecord, ParsedLabel

ALL_CLASSES = "all_classes"
EXCLUDE_NO_RELATION = "exclude_no_relation"


class MetricsError(ValueError):
    """Metric inputs violate a precondition."""


@dataclass(frozen=True)
class LabelVector:
    """Parsed outcomes aligned to instance ids."""

    ids: tuple[str, ...]
    outcomes: tuple[ParsedLabel, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.outcomes):
            raise MetricsError("ids and outcomes must have equal length")

    def __len__(self) -> int:
        return len(self.ids)

    def categories(self) -> list[str]:
        return [outcome.category() for outcome in self.outcomes]

    @classmethod
    def from_records(cls, records: Sequence[AnnotationRecord]) -> "LabelVector":
        return cls(
            ids=tuple(r.instance_id for r in records),
            outcomes=tuple(r.parsed for r in records),
        )


def _as_categories(vector) -> list[str]:
    if isinstance(vector, LabelVector):
        return vector.categories()
    out = []
    for item in vector:
        out.append(item.category() if isinstance(item, ParsedLabel) else str(item))
    return out


def cohen_kappa(a, b) -> float:
    """Cohen's kappa between two raters over the same items."""
    cat_a, cat_b = _as_categories(a), _as_categories(b)
    if len(cat_a) != len(cat_b):
        raise MetricsError(f"length mismatch: {len(cat_a)} vs {len(cat_b)}")
    if not cat_a:
        raise MetricsError("need at least one rated item")
    n = len(cat_a)
    p_o = sum(x == y for x, y in zip(cat_a, cat_b)) / n
    categories = sorted(set(cat_a) | set(cat_b))
    p_e = sum((cat_a.count(c) / n) * (cat_b.count(c) / n) for c in categories)
    if p_e >= 1.0:
        # Both raters constant on the same category; agreement is perfect.
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(ratings) -> float:
    """Fleiss' kappa from an items x categories rater-count matrix."""
    data = np.asarray(ratings)
    if data.ndim != 2 or data.size == 0:
        raise MetricsError("ratings must be a non-empty 2D matrix")
    if np.any(data < 0) or not np.issubdtype(data.dtype, np.integer):
        raise MetricsError("ratings must be non-negative integers")
    row_sums = data.sum(axis=1)
    n = int(row_sums[0])
    if n < 2:
        raise MetricsError("need at least 2 raters per item")
    if np.any(row_sums != n):
        raise MetricsError("every item must have the same number of ratings")
    total = data.sum()
    p_j = data.sum(axis=0) / total
    p_i = (np.sum(data * (data - 1), axis=1)) / (n * (n - 1))
    p_bar = float(np.mean(p_i))
    p_e = float(np.sum(p_j**2))
    if p_e >= 1.0:
        return 1.0 if p_bar == 1.0 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


def ratings_matrix(vectors: Sequence) -> np.ndarray:
    """Build the items x categories count matrix from per-rater vectors."""
    category_lists = [_as_categories(v) for v in vectors]
    if len(category_lists) < 2:
        raise MetricsError("need at least 2 raters")
    length = len(category_lists[0])
    if any(len(cats) != length for cats in category_lists):
        raise MetricsError("all raters must rate the same items")
    categories = sorted({c for cats in category_lists for c in cats})
    index = {c: j for j, c in enumerate(categories)}
    matrix = np.zeros((length, len(categories)), dtype=int)
    for cats in category_lists:
        for i, c in enumerate(cats):
            matrix[i, index[c]] += 1
    return matrix


@dataclass(frozen=True)
class PairMetrics:
    micro_f1: float
    accuracy: float
    n: int

    def to_dict(self) -> dict:
        return {"micro_f1": self.micro_f1, "accuracy": self.accuracy, "n": self.n}


@dataclass(frozen=True)
class MetricReport:
    """Per-pair quality metrics plus their unweighted mean."""

    per_pair: Mapping[str, PairMetrics]
    overall_micro_f1: float
    overall_accuracy: float

    def to_dict(self) -> dict:
        return {
            "per_pair": {pair: m.to_dict() for pair, m in sorted(self.per_pair.items())},
            "overall": {
                "micro_f1": self.overall_micro_f1,
                "accuracy": self.overall_accuracy,
            },
        }

    @classmethod
    def from_pair_metrics(cls, per_pair: Mapping[str, PairMetrics]) -> "MetricReport":
        if not per_pair:
            raise MetricsError("cannot build a report with no entity pairs")
        values = list(per_pair.values())
        return cls(
            per_pair=dict(per_pair),
            overall_micro_f1=sum(m.micro_f1 for m in values) / len(values),
            overall_accuracy=sum(m.accuracy for m in values) / len(values),
        )


def _pool_pair(
    items: Sequence[tuple[str, ParsedLabel]], no_relation: str, mode: str
) -> PairMetrics:
    tp = fp = fn = correct = 0
    for gold, outcome in items:
        exclude_gold = mode == EXCLUDE_NO_RELATION and gold == no_relation
        if outcome.kind == BLANK:
            if not exclude_gold:
                fn += 1
        elif outcome.kind == HALLUCINATION:
            fp += 1
            if not exclude_gold:
                fn += 1
        else:
            pred = outcome.label
            exclude_pred = mode == EXCLUDE_NO_RELATION and pred == no_relation
            if pred == gold:
                correct += 1
                if not exclude_pred:
                    tp += 1
            else:
                if not exclude_pred:
                    fp += 1
                if not exclude_gold:
                    fn += 1
    denominator = 2 * tp + fp + fn
    micro_f1 = (2 * tp / denominator) if denominator else 0.0
    return PairMetrics(micro_f1=micro_f1, accuracy=correct / len(items), n=len(items))


def evaluate(predictions: LabelVector, dataset: Dataset, mode: str = ALL_CLASSES) -> MetricReport:
    """Score predictions against expert gold labels, per pair then averaged."""
    if mode not in (ALL_CLASSES, EXCLUDE_NO_RELATION):
        raise MetricsError(f"unknown mode {mode!r}")
    by_pair: dict[str, list[tuple[str, ParsedLabel]]] = {}
    for instance_id, outcome in zip(predictions.ids, predictions.outcomes):
        instance = dataset.get(instance_id)
        if instance.gold_label is None:
            raise MetricsError(f"instance {instance_id}: no gold label")
        by_pair.setdefault(instance.pair_type, []).append((instance.gold_label, outcome))
    per_pair = {
        pair: _pool_pair(items, dataset.schema_for(pair).no_relation_label, mode)
        for pair, items in by_pair.items()
    }
    return MetricReport.from_pair_metrics(per_pair)


def average_runs(reports: Sequence[MetricReport]) -> MetricReport:
    """Field-wise arithmetic mean of reports over identical pair sets."""
    if not reports:
        raise MetricsError("no reports to average")
    pair_sets = [set(r.per_pair) for r in reports]
    if any(ps != pair_sets[0] for ps in pair_sets):
        raise MetricsError("reports cover different entity-pair sets")
    averaged = {}
    for pair in pair_sets[0]:
        metrics = [r.per_pair[pair] for r in reports]
        sizes = {m.n for m in metrics}
        if len(sizes) > 1:
            raise MetricsError(f"pair {pair}: instance counts differ across runs")
        averaged[pair] = PairMetrics(
            micro_f1=sum(m.micro_f1 for m in metrics) / len(metrics),
            accuracy=sum(m.accuracy for m in metrics) / len(metrics),
            n=metrics[0].n,
        )
    return MetricReport.from_pair_metrics(averaged)


def hallucination_rate(
    records: Sequence[AnnotationRecord], dataset: Dataset, gold_filter: str
) -> float:
    """Fraction of hallucinated outputs among instances with the given gold label."""
    filtered = [r for r in records if dataset.get(r.instance_id).gold_label == gold_filter]
    if not filtered:
        raise MetricsError(f"no records with gold label {gold_filter!r}")
    hallucinated = sum(r.parsed.kind == HALLUCINATION for r in filtered)
    return hallucinated / len(filtered)


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    significant: bool
    df: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "significant": self.significant,
            "df": self.df,
        }


def paired_ttest(metric_a: Sequence[float], metric_b: Sequence[float], alpha: float = 0.05) -> TTestResult:
    """Two-tailed paired t-test over per-entity-pair metric values."""
    a = np.asarray(metric_a, dtype=float)
    b = np.asarray(metric_b, dtype=float)
    if a.shape != b.shape:
        raise MetricsError("samples must be paired (equal length)")
    n = a.size
    if n < 2:
        raise MetricsError("need at least 2 pairs")
    diffs = a - b
    if np.all(diffs == diffs[0]):
        # Zero variance: identical pairs agree perfectly, a constant shift is
        # maximally significant.
        if diffs[0] == 0.0:
            return TTestResult(statistic=0.0, p_value=1.0, significant=1.0 < alpha, df=n - 1)
        statistic = math.inf if diffs[0] > 0 else -math.inf
        return TTestResult(statistic=statistic, p_value=0.0, significant=0.0 < alpha, df=n - 1)
    result = stats.ttest_rel(a, b)
    p_value = float(result.pvalue)
    return TTestResult(
        statistic=float(result.statistic),
        p_value=p_value,
        significant=p_value < alpha,
        df=n - 1,
    )
