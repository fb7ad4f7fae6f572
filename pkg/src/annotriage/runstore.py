"""Append-only persistence for annotation runs.

A run is a directory holding ``records.jsonl`` (one annotation record per
line, written as results arrive) and ``manifest.json`` (written last, so its
presence means the run completed). Interrupted runs resume by skipping the
instance ids already on disk.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .parsing import AnnotationRecord

RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"

EPOCH_TIMESTAMP = "1970-01-01T00:00:00+00:00"


class RunStoreError(ValueError):
    """Run store contents violate the expected layout."""


@dataclass(frozen=True)
class RunTotals:
    instances: int
    input_tokens: int
    output_tokens: int
    input_chars: int
    output_chars: int
    wall_seconds: float

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "input_chars": self.input_chars,
            "output_chars": self.output_chars,
            "wall_seconds": self.wall_seconds,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunTotals":
        return cls(
            instances=int(data["instances"]),
            input_tokens=int(data["input_tokens"]),
            output_tokens=int(data["output_tokens"]),
            input_chars=int(data["input_chars"]),
            output_chars=int(data["output_chars"]),
            wall_seconds=float(data["wall_seconds"]),
        )


@dataclass(frozen=True)
class RunManifest:
    """Persisted description of one completed annotation pass."""

    run_id: str
    backend: Mapping
    variant: str
    temperature: float
    seed: int | None
    run_index: int
    dataset_fingerprint: str
    totals: RunTotals
    created_at: str

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "backend": dict(self.backend),
            "variant": self.variant,
            "temperature": self.temperature,
            "seed": self.seed,
            "run_index": self.run_index,
            "dataset_fingerprint": self.dataset_fingerprint,
            "totals": self.totals.to_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            backend=dict(data["backend"]),
            variant=data["variant"],
            temperature=float(data["temperature"]),
            seed=data.get("seed"),
            run_index=int(data["run_index"]),
            dataset_fingerprint=data["dataset_fingerprint"],
            totals=RunTotals.from_dict(data["totals"]),
            created_at=data["created_at"],
        )


def _dump(data: Mapping) -> str:
    return json.dumps(data, ensure_ascii=False, sort_keys=True)


class RunStore:
    """Single-writer record sink for one run directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.records_path = self.directory / RECORDS_FILE
        self.manifest_path = self.directory / MANIFEST_FILE

    def existing_ids(self) -> set[str]:
        if not self.records_path.exists():
            return set()
        return {record.instance_id for record in self.load_records()}

    def append(self, record: AnnotationRecord) -> None:
        with open(self.records_path, "a", encoding="utf-8") as f:
            f.write(_dump(record.to_dict()) + "\n")
            f.flush()

    def load_records(self) -> list[AnnotationRecord]:
        if not self.records_path.exists():
            raise RunStoreError(f"{self.records_path}: no records file")
        records = []
        with open(self.records_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    records.append(AnnotationRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise RunStoreError(
                        f"{self.records_path}:{lineno}: corrupt record ({exc})"
                    ) from exc
        return records

    @property
    def complete(self) -> bool:
        return self.manifest_path.exists()

    def write_manifest(self, manifest: RunManifest) -> None:
        tmp = self.manifest_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(_dump(manifest.to_dict()) + "\n")
            f.flush()
            os.fsync(f.fileno())
        tmp.replace(self.manifest_path)

    def load_manifest(self) -> RunManifest:
        if not self.manifest_path.exists():
            raise RunStoreError(
                f"{self.directory}: no manifest (run incomplete or missing)"
            )
        with open(self.manifest_path, encoding="utf-8") as f:
            return RunManifest.from_dict(json.load(f))
