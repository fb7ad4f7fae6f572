"""Shared fixtures: the ORG-DATE reference schema/bank and synthetic datasets."""

from __future__ import annotations

import json
from importlib import resources

import pytest

from annotriage.dataset import Dataset, EntitySpan, Instance, RelationSchema, load_schemas
from annotriage.prompting import ExemplarBank
from annotriage.rng import SplitMix64, derive_key

FIG_SENTENCE = (
    "The predecessor Mississippi Power Company was incorporated under the laws of the "
    "State of Maine on November 24, 1924 and was admitted to do business in Mississippi "
    "on December 23, 1924 and in Alabama on December 7, 1962."
)


def _resource_path(name: str):
    return resources.files("annotriage.resources").joinpath(name)


@pytest.fixture(scope="session")
def org_date_schema() -> RelationSchema:
    with resources.as_file(_resource_path("schema_org_date.json")) as path:
        return load_schemas(path)["ORG-DATE"]


@pytest.fixture(scope="session")
def org_date_bank() -> ExemplarBank:
    with resources.as_file(_resource_path("exemplars_org_date.json")) as path:
        return ExemplarBank.from_file(path)


@pytest.fixture(scope="session")
def fig_instance() -> Instance:
    e1_surface = "Mississippi Power Company"
    e2_surface = "December 23, 1924"
    e1_start = FIG_SENTENCE.index(e1_surface)
    e2_start = FIG_SENTENCE.index(e2_surface)
    return Instance(
        id="org-date-0001",
        sentence=FIG_SENTENCE,
        e1=EntitySpan(surface=e1_surface, start=e1_start, end=e1_start + len(e1_surface)),
        e2=EntitySpan(surface=e2_surface, start=e2_start, end=e2_start + len(e2_surface)),
        pair_type="ORG-DATE",
        gold_label="no_other",
        crowd_labels=("formed_on",),
    )


def synth_schema(pair_type: str = "ORG-DATE") -> RelationSchema:
    return RelationSchema(
        pair_type=pair_type,
        labels=("formed_on", "acquired_on", "no_other"),
        templates={
            "formed_on": "{E1} is/was formed on {E2}",
            "acquired_on": "{E1} is/was acquired on {E2}",
            "no_other": "no/other relation between {E1} and {E2}",
        },
        no_relation_label="no_other",
        task_description="Select date of formation relationship described in one sentence.",
    )


def make_instance(
    index: int, pair_type: str, labels: tuple[str, ...], seed: int = 0, swap: bool = False
) -> Instance:
    """One synthetic instance; ``swap`` puts e2 before e1 in the sentence."""
    e1_surface = f"Acme Holdings {index}"
    e2_surface = f"March {1 + index % 28}, 19{50 + index % 50}"
    if swap:
        sentence = f"On {e2_surface} the company {e1_surface} filed its annual report."
        e2_start = len("On ")
        e1_start = sentence.index(e1_surface)
    else:
        sentence = f"{e1_surface} was incorporated in Delaware on {e2_surface} as stated."
        e1_start = 0
        e2_start = sentence.index(e2_surface)
    rng = SplitMix64(derive_key(seed, "gold", f"{pair_type}-{index}"))
    return Instance(
        id=f"{pair_type.lower()}-{index:05d}",
        sentence=sentence,
        e1=EntitySpan(e1_surface, e1_start, e1_start + len(e1_surface)),
        e2=EntitySpan(e2_surface, e2_start, e2_start + len(e2_surface)),
        pair_type=pair_type,
        gold_label=labels[rng.randrange(len(labels))],
    )


def make_synth_dataset(
    n: int, seed: int = 0, pair_types: tuple[str, ...] = ("ORG-DATE",)
) -> Dataset:
    schemas = {pair: synth_schema(pair) for pair in pair_types}
    instances = []
    for i in range(n):
        pair = pair_types[i % len(pair_types)]
        instances.append(
            make_instance(i, pair, schemas[pair].labels, seed=seed, swap=(i % 3 == 2))
        )
    return Dataset(schemas=schemas, instances=tuple(instances))


def write_dataset_files(dataset: Dataset, directory) -> tuple:
    """Write (instances.jsonl, schemas.json) under ``directory``."""
    from annotriage.dataset import save_dataset, save_schemas

    instances_path = directory / "instances.jsonl"
    schemas_path = directory / "schemas.json"
    save_dataset(dataset, instances_path)
    save_schemas(dataset.schemas, schemas_path)
    return instances_path, schemas_path


def write_config(directory, dataset: Dataset, backends: dict, **extra) -> "Path":
    """Write a config JSON naming freshly written dataset files."""
    instances_path, schemas_path = write_dataset_files(dataset, directory)
    body = {
        "dataset": str(instances_path),
        "schemas": str(schemas_path),
        "runs_dir": str(directory / "runs"),
        "backends": backends,
        **extra,
    }
    config_path = directory / "config.json"
    config_path.write_text(json.dumps(body, indent=2), encoding="utf-8")
    return config_path
