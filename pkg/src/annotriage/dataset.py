"""Relation-extraction instances, their label schemas, and the JSONL interchange format.

A dataset is two files: a JSONL file with one instance per line and a JSON
schema file mapping each entity-pair type to its relation labels and option
templates. Everything is validated on load and immutable afterwards, so a
loaded :class:`Dataset` can be shared freely across workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping


class DatasetError(ValueError):
    """A dataset or schema file violates its contract."""


@dataclass(frozen=True)
class EntitySpan:
    """A contiguous character span inside a sentence."""

    surface: str
    start: int
    end: int

    def to_dict(self) -> dict:
        return {"surface": self.surface, "start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, data: Mapping) -> "EntitySpan":
        return cls(surface=data["surface"], start=int(data["start"]), end=int(data["end"]))


@dataclass(frozen=True)
class RelationSchema:
    """Label inventory for one entity-pair type.

    ``templates`` holds the natural-language option text per label with
    ``{E1}``/``{E2}`` placeholders; canonical label identifiers stay
    snake_case and never appear in rendered prompts. ``task_description``
    is the optional pair-specific preamble used by the full-instruction
    prompt style.
    """

    pair_type: str
    labels: tuple[str, ...]
    templates: Mapping[str, str]
    no_relation_label: str
    task_description: str = ""

    def validate(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise DatasetError(f"schema {self.pair_type}: duplicate labels")
        if not self.labels:
            raise DatasetError(f"schema {self.pair_type}: empty label list")
        if self.no_relation_label not in self.labels:
            raise DatasetError(
                f"schema {self.pair_type}: no_relation_label "
                f"{self.no_relation_label!r} not in labels"
            )
        for label in self.labels:
            template = self.templates.get(label)
            if template is None:
                raise DatasetError(f"schema {self.pair_type}: missing template for {label!r}")
            if "{E1}" not in template or "{E2}" not in template:
                raise DatasetError(
                    f"schema {self.pair_type}: template for {label!r} must "
                    "reference both {E1} and {E2}"
                )


@dataclass(frozen=True)
class Instance:
    """One annotatable sentence with two entity spans."""

    id: str
    sentence: str
    e1: EntitySpan
    e2: EntitySpan
    pair_type: str
    gold_label: str | None = None
    crowd_labels: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        data = {
            "id": self.id,
            "sentence": self.sentence,
            "e1": self.e1.to_dict(),
            "e2": self.e2.to_dict(),
            "pair_type": self.pair_type,
        }
        if self.gold_label is not None:
            data["gold_label"] = self.gold_label
        if self.crowd_labels is not None:
            data["crowd_labels"] = list(self.crowd_labels)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "Instance":
        crowd = data.get("crowd_labels")
        return cls(
            id=str(data["id"]),
            sentence=data["sentence"],
            e1=EntitySpan.from_dict(data["e1"]),
            e2=EntitySpan.from_dict(data["e2"]),
            pair_type=data["pair_type"],
            gold_label=data.get("gold_label"),
            crowd_labels=tuple(crowd) if crowd is not None else None,
        )


@dataclass(frozen=True)
class Dataset:
    """Validated instances plus the schemas they refer to."""

    schemas: Mapping[str, RelationSchema]
    instances: tuple[Instance, ...]
    _by_id: Mapping[str, Instance] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {inst.id: inst for inst in self.instances})

    def __len__(self) -> int:
        return len(self.instances)

    def get(self, instance_id: str) -> Instance:
        try:
            return self._by_id[instance_id]
        except KeyError:
            raise DatasetError(f"unknown instance id {instance_id!r}") from None

    def schema_for(self, instance: Instance | str) -> RelationSchema:
        pair = instance if isinstance(instance, str) else instance.pair_type
        try:
            return self.schemas[pair]
        except KeyError:
            raise DatasetError(f"no schema for pair type {pair!r}") from None


def _validate_span(span: EntitySpan, sentence: str, instance_id: str, which: str) -> None:
    if not (0 <= span.start < span.end <= len(sentence)):
        raise DatasetError(
            f"instance {instance_id}: {which} span [{span.start}, {span.end}) "
            f"out of bounds for sentence of length {len(sentence)}"
        )
    if sentence[span.start : span.end] != span.surface:
        raise DatasetError(
            f"instance {instance_id}: {which} surface {span.surface!r} does not "
            f"match sentence[{span.start}:{span.end}] "
            f"({sentence[span.start:span.end]!r})"
        )


def validate_instance(instance: Instance, schema: RelationSchema) -> None:
    _validate_span(instance.e1, instance.sentence, instance.id, "e1")
    _validate_span(instance.e2, instance.sentence, instance.id, "e2")
    if instance.e1.start < instance.e2.end and instance.e2.start < instance.e1.end:
        raise DatasetError(f"instance {instance.id}: e1 and e2 spans overlap")
    if instance.gold_label is not None and instance.gold_label not in schema.labels:
        raise DatasetError(
            f"instance {instance.id}: gold label {instance.gold_label!r} not in "
            f"schema {schema.pair_type}"
        )
    for label in instance.crowd_labels or ():
        if label not in schema.labels:
            raise DatasetError(
                f"instance {instance.id}: crowd label {label!r} not in "
                f"schema {schema.pair_type}"
            )


def load_schemas(path: str | Path) -> dict[str, RelationSchema]:
    """Load the pair_type -> schema map from a JSON file."""
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: schema file must be a JSON object")
    schemas = {}
    for pair_type, body in raw.items():
        schema = RelationSchema(
            pair_type=pair_type,
            labels=tuple(body["labels"]),
            templates=dict(body["templates"]),
            no_relation_label=body["no_relation_label"],
            task_description=body.get("task_description", ""),
        )
        schema.validate()
        schemas[pair_type] = schema
    return schemas


def load_dataset(path: str | Path, schemas: Mapping[str, RelationSchema] | str | Path) -> Dataset:
    """Load and validate a JSONL instance file against its schemas.

    ``schemas`` may be a pre-loaded map or the path of the schema file.
    """
    if not isinstance(schemas, Mapping):
        schemas = load_schemas(schemas)
    instances = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON line ({exc})") from exc
            try:
                instance = Instance.from_dict(data)
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: missing field {exc}") from exc
            if instance.id in seen_ids:
                raise DatasetError(f"instance {instance.id}: duplicate id")
            seen_ids.add(instance.id)
            if instance.pair_type not in schemas:
                raise DatasetError(
                    f"instance {instance.id}: no schema for pair type {instance.pair_type!r}"
                )
            validate_instance(instance, schemas[instance.pair_type])
            instances.append(instance)
    return Dataset(schemas=dict(schemas), instances=tuple(instances))


def instance_line(instance: Instance) -> str:
    """Canonical one-line JSON serialization of an instance."""
    return json.dumps(instance.to_dict(), ensure_ascii=False, sort_keys=True)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write instances back out in the canonical JSONL form."""
    with open(path, "w", encoding="utf-8") as f:
        for instance in dataset.instances:
            f.write(instance_line(instance) + "\n")


def save_schemas(schemas: Mapping[str, RelationSchema], path: str | Path) -> None:
    body = {}
    for pair_type, schema in schemas.items():
        entry = {
            "labels": list(schema.labels),
            "templates": dict(schema.templates),
            "no_relation_label": schema.no_relation_label,
        }
        if schema.task_description:
            entry["task_description"] = schema.task_description
        body[pair_type] = entry
    with open(path, "w", encoding="utf-8") as f:
        json.dump(body, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")


def dataset_fingerprint(path: str | Path) -> str:
    """SHA-256 of the dataset file bytes; stored in run manifests."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def mark_entities(instance: Instance) -> str:
    """Return the sentence with ``**`` around e1 and ``__`` around e2.

    Markers are placed by character offset, never by string search, so
    repeated entity surfaces cannot mislead the placement. Spans may appear
    in either order in the sentence.
    """
    text = instance.sentence
    # Insert right-to-left so earlier offsets stay valid.
    for span, marker in sorted(
        [(instance.e1, "**"), (instance.e2, "__")],
        key=lambda pair: pair[0].start,
        reverse=True,
    ):
        text = text[: span.start] + marker + text[span.start : span.end] + marker + text[span.end :]
    return text


def counts_by_pair(dataset: Dataset) -> dict[str, int]:
    """Instance count per entity-pair type."""
    counts: dict[str, int] = {}
    for instance in dataset.instances:
        counts[instance.pair_type] = counts.get(instance.pair_type, 0) + 1
    return counts
