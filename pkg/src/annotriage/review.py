"""Expert review queue: persistence, decisions, and the merged export.

A queue directory holds ``queue.json`` (the triage snapshot: review items
plus the auto-accepted ids) and ``decisions.jsonl`` (an append-only log of
expert decisions, replayed at startup). Decisions are durable before any
caller sees an acknowledgement; a later decision for the same instance
supersedes the earlier one.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .aggregation import TriageSplit, VoteResult
from .dataset import Dataset, mark_entities
from .parsing import ParsedLabel

QUEUE_FILE = "queue.json"
DECISIONS_FILE = "decisions.jsonl"


class ReviewError(ValueError):
    """Review queue inputs violate a precondition."""


class UnknownInstance(ReviewError):
    pass


class InvalidDecisionLabel(ReviewError):
    pass


@dataclass(frozen=True)
class ExpertDecision:
    label: str
    reviewer: str
    timestamp: str

    def to_dict(self) -> dict:
        return {"label": self.label, "reviewer": self.reviewer, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExpertDecision":
        return cls(label=data["label"], reviewer=data["reviewer"], timestamp=data["timestamp"])


@dataclass(frozen=True)
class ReviewItem:
    """Everything an expert needs to adjudicate one queued instance."""

    instance_id: str
    marked_sentence: str
    pair_type: str
    options: tuple[str, ...]  # canonical schema order, never prompt order
    option_texts: tuple[str, ...]
    votes: tuple[tuple[str, ParsedLabel], ...]
    confid: Mapping[str, float]
    rel_index: float
    selected: str
    decision: ExpertDecision | None = None

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "marked_sentence": self.marked_sentence,
            "pair_type": self.pair_type,
            "options": list(self.options),
            "option_texts": list(self.option_texts),
            "votes": [
                {"annotator": annotator, "outcome": outcome.to_dict()}
                for annotator, outcome in self.votes
            ],
            "confid": {label: value for label, value in sorted(self.confid.items())},
            "rel_index": self.rel_index,
            "selected": self.selected,
            "decision": self.decision.to_dict() if self.decision else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ReviewItem":
        decision = data.get("decision")
        return cls(
            instance_id=data["instance_id"],
            marked_sentence=data["marked_sentence"],
            pair_type=data["pair_type"],
            options=tuple(data["options"]),
            option_texts=tuple(data["option_texts"]),
            votes=tuple(
                (entry["annotator"], ParsedLabel.from_dict(entry["outcome"]))
                for entry in data["votes"]
            ),
            confid=dict(data["confid"]),
            rel_index=float(data["rel_index"]),
            selected=data["selected"],
            decision=ExpertDecision.from_dict(decision) if decision else None,
        )


def build_review_items(
    dataset: Dataset, votes: Mapping[str, VoteResult], queued_ids: Sequence[str]
) -> list[ReviewItem]:
    items = []
    for instance_id in queued_ids:
        instance = dataset.get(instance_id)
        schema = dataset.schema_for(instance)
        vote = votes[instance_id]
        items.append(
            ReviewItem(
                instance_id=instance_id,
                marked_sentence=mark_entities(instance),
                pair_type=instance.pair_type,
                options=tuple(schema.labels),
                option_texts=tuple(
                    schema.templates[label]
                    .replace("{E1}", instance.e1.surface)
                    .replace("{E2}", instance.e2.surface)
                    for label in schema.labels
                ),
                votes=vote.assessments,
                confid=vote.confid,
                rel_index=vote.rel_index,
                selected=vote.selected,
            )
        )
    return items


def write_queue(
    directory: str | Path,
    items: Sequence[ReviewItem],
    split: TriageSplit,
    auto_labels: Mapping[str, str],
) -> None:
    """Persist a fresh triage queue (clears any previous decision log)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    body = {
        "items": [item.to_dict() for item in items],
        "auto": [
            {"instance_id": instance_id, "label": auto_labels[instance_id]}
            for instance_id in split.auto
        ],
    }
    with open(directory / QUEUE_FILE, "w", encoding="utf-8") as f:
        json.dump(body, f, ensure_ascii=False, sort_keys=True)
        f.write("\n")
    decisions = directory / DECISIONS_FILE
    if decisions.exists():
        decisions.unlink()


class ReviewQueue:
    """In-memory queue state backed by the on-disk decision log."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        queue_path = self.directory / QUEUE_FILE
        if not queue_path.exists():
            raise ReviewError(f"{queue_path}: no review queue (run triage first)")
        with open(queue_path, encoding="utf-8") as f:
            body = json.load(f)
        self._items: dict[str, ReviewItem] = {}
        order = []
        for entry in body["items"]:
            item = ReviewItem.from_dict(entry)
            self._items[item.instance_id] = item
            order.append((item.rel_index, item.instance_id))
        # Strict queue ordering: hardest (lowest reliability) first.
        self._order = [instance_id for _, instance_id in sorted(order)]
        self.auto_labels = {
            entry["instance_id"]: entry["label"] for entry in body["auto"]
        }
        self._log_path = self.directory / DECISIONS_FILE
        self._lock = threading.Lock()
        self.superseded = 0
        self._replay()

    def _replay(self) -> None:
        if not self._log_path.exists():
            return
        with open(self._log_path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._apply(entry["instance_id"], ExpertDecision.from_dict(entry))

    def _apply(self, instance_id: str, decision: ExpertDecision) -> None:
        item = self._items[instance_id]
        if item.decision is not None:
            self.superseded += 1
        self._items[instance_id] = replace(item, decision=decision)

    def items(self) -> list[ReviewItem]:
        return [self._items[instance_id] for instance_id in self._order]

    def pending(self) -> list[ReviewItem]:
        return [item for item in self.items() if item.decision is None]

    def get(self, instance_id: str) -> ReviewItem:
        try:
            return self._items[instance_id]
        except KeyError:
            raise UnknownInstance(f"instance {instance_id!r} is not in the review queue") from None

    def record_decision(self, instance_id: str, label: str, reviewer: str) -> dict:
        """Persist a decision, then apply it. Returns queue bookkeeping."""
        with self._lock:
            item = self.get(instance_id)
            if label not in item.options:
                raise InvalidDecisionLabel(
                    f"label {label!r} is not an option for instance {instance_id}"
                )
            superseding = item.decision is not None
            decision = ExpertDecision(
                label=label,
                reviewer=reviewer,
                timestamp=time.strftime("%Y-%m-%dT%H:%M:%S+00:00", time.gmtime()),
            )
            entry = {"instance_id": instance_id, **decision.to_dict()}
            with open(self._log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._apply(instance_id, decision)
            return {
                "remaining": len(self.pending()),
                "superseded": superseding,
            }

    def progress(self) -> dict:
        pending = self.pending()
        total = len(self._order)
        mean_remaining = (
            sum(item.rel_index for item in pending) / len(pending) if pending else None
        )
        return {
            "total": total,
            "reviewed": total - len(pending),
            "auto_accepted": len(self.auto_labels),
            "mean_rel_index_remaining": mean_remaining,
        }

    def export_rows(self) -> Iterable[dict]:
        """Final labels in instance-id order: auto labels with expert overrides."""
        rows = {}
        for instance_id, label in self.auto_labels.items():
            rows[instance_id] = {"instance_id": instance_id, "label": label, "source": "auto"}
        for item in self.items():
            if item.decision is not None:
                rows[item.instance_id] = {
                    "instance_id": item.instance_id,
                    "label": item.decision.label,
                    "source": "expert",
                    "reviewer": item.decision.reviewer,
                }
            else:
                rows[item.instance_id] = {
                    "instance_id": item.instance_id,
                    "label": item.selected,
                    "source": "auto",
                }
        for instance_id in sorted(rows):
            yield rows[instance_id]

    def export_jsonl(self) -> str:
        return "".join(
            json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n"
            for row in self.export_rows()
        )
