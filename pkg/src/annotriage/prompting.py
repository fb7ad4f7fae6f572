"""Deterministic rendering of the six prompt variants.

Each prompt is assembled from named parts (instruction, examples, sentence
body, option block, system role). ``build_prompt`` produces the canonical
single-text rendering; ``backend_composition`` maps the same parts onto the
per-backend message orderings used by the HTTP transport.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import Instance, RelationSchema, mark_entities
from .rng import SplitMix64, derive_key


class PromptError(ValueError):
    """Prompt construction could not satisfy its contract."""


class PromptVariant(str, Enum):
    SIMPLE = "simple"
    FULL_INSTRUCTION = "full_instruction"
    ONE_SHOT = "one_shot"
    FIVE_SHOT = "five_shot"
    ONE_SHOT_COT = "one_shot_cot"
    FIVE_SHOT_COT = "five_shot_cot"

    @property
    def shot_count(self) -> int:
        return {"one_shot": 1, "five_shot": 5, "one_shot_cot": 1, "five_shot_cot": 5}.get(
            self.value, 0
        )

    @property
    def is_cot(self) -> bool:
        return self.value.endswith("_cot")

    @property
    def category(self) -> str:
        """zero_shot / few_shot / few_shot_cot, the grouping used by compositions."""
        if self.shot_count == 0:
            return "zero_shot"
        return "few_shot_cot" if self.is_cot else "few_shot"


@dataclass(frozen=True)
class Exemplar:
    """One worked example for few-shot prompts; ``reasoning`` only for CoT use."""

    pair_type: str
    sentence: str  # already entity-marked
    answer: str
    reasoning: str = ""


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully materialized prompt for one (instance, variant).

    ``option_order`` maps displayed option number (1-based position) to the
    canonical label; ``option_texts`` holds the instantiated option text in
    the same displayed order. ``parts`` keeps the named building blocks for
    backend-specific message composition.
    """

    instance_id: str
    variant: PromptVariant
    text: str
    option_order: tuple[str, ...]
    option_texts: tuple[str, ...]
    shuffle_seed: int
    parts: Mapping[str, str] = field(default_factory=dict, compare=False)


class ExemplarBank:
    """Ordered exemplars keyed by (pair_type, variant kind)."""

    def __init__(self, entries: Mapping[str, Mapping[str, Sequence[Exemplar]]] | None = None):
        self._entries: dict[tuple[str, str], tuple[Exemplar, ...]] = {}
        for pair_type, by_variant in (entries or {}).items():
            for variant_kind, exemplars in by_variant.items():
                self.add(pair_type, variant_kind, exemplars)

    def add(self, pair_type: str, variant_kind: str, exemplars: Sequence[Exemplar]) -> None:
        PromptVariant(variant_kind)  # reject unknown kinds early
        self._entries[(pair_type, variant_kind)] = tuple(exemplars)

    def exemplars_for(self, pair_type: str, variant: PromptVariant) -> tuple[Exemplar, ...]:
        needed = variant.shot_count
        if needed == 0:
            return ()
        available = self._entries.get((pair_type, variant.value), ())
        if len(available) < needed:
            raise PromptError(
                f"exemplar bank has {len(available)} exemplar(s) for "
                f"({pair_type}, {variant.value}), {needed} required"
            )
        chosen = available[:needed]
        for exemplar in chosen:
            if exemplar.pair_type != pair_type:
                raise PromptError(
                    f"exemplar pair type {exemplar.pair_type!r} does not match {pair_type!r}"
                )
            if variant.is_cot and not exemplar.reasoning.strip():
                raise PromptError(
                    f"CoT exemplar for ({pair_type}, {variant.value}) has empty reasoning"
                )
        return chosen

    @classmethod
    def from_file(cls, path: str | Path) -> "ExemplarBank":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        bank = cls()
        for pair_type, by_variant in raw.items():
            for variant_kind, entries in by_variant.items():
                exemplars = [
                    Exemplar(
                        pair_type=pair_type,
                        sentence=entry["sentence"],
                        answer=entry["answer"],
                        reasoning=entry.get("reasoning", ""),
                    )
                    for entry in entries
                ]
                bank.add(pair_type, variant_kind, exemplars)
        return bank


GENERIC_INSTRUCTION = (
    "Select the statement that best describes the relation in the example sentence below. "
    "Ignore any grammatical errors. If there are multiple options, please choose the one "
    "that is clearest and most obvious from the sentence."
)

SYSTEM_ROLE = (
    "You are an AI assistant and relation extraction checker. You read the prompt, note "
    "where the entities in question are and determine the relation between them. Once done, "
    "please select from option which best suite the relation."
)

OPTIONS_PREAMBLE = "Please choose the MOST appropriate relation from the following options:"

DEFAULT_TASK_DESCRIPTION = "Select the relation described in one sentence."

# Built-in message orderings. "body" is the marked target sentence, prefixed
# by the rendered examples for few-shot variants.
DEFAULT_COMPOSITIONS: dict[str, dict[str, tuple[str, ...]]] = {
    "deferred_system": {
        "zero_shot": ("body", "options", "system"),
        "few_shot": ("instruction", "body", "options", "system"),
        "few_shot_cot": ("instruction", "body", "options", "system"),
    },
    "leading_system": {
        "zero_shot": ("system", "body", "options"),
        "few_shot": ("system", "instruction", "body", "options"),
        "few_shot_cot": ("instruction", "body", "options", "system"),
    },
    "inline_system": {
        "zero_shot": ("system", "body", "options"),
        "few_shot": ("system", "body", "options"),
        "few_shot_cot": ("instruction", "body", "options", "system"),
    },
}


def load_compositions(path: str | Path) -> dict[str, dict[str, tuple[str, ...]]]:
    """Load a backend-style composition file (same shape as the defaults)."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    styles = {}
    for style, by_category in raw.items():
        styles[style] = {category: tuple(parts) for category, parts in by_category.items()}
    return styles


def shuffle_options(labels: Sequence[str], seed: int, instance_id: str) -> tuple[str, ...]:
    """Seeded permutation of the label list, keyed on (seed, instance id)."""
    if not labels:
        raise PromptError("cannot shuffle an empty label list")
    shuffled = list(labels)
    SplitMix64(derive_key(seed, "options", instance_id)).shuffle(shuffled)
    return tuple(shuffled)


def render_option(template: str, e1_surface: str, e2_surface: str) -> str:
    return template.replace("{E1}", e1_surface).replace("{E2}", e2_surface)


def _options_block(option_texts: Sequence[str]) -> str:
    lines = [OPTIONS_PREAMBLE]
    lines.extend(f"{i}. {text}" for i, text in enumerate(option_texts, 1))
    return "\n".join(lines)


def _examples_block(exemplars: Sequence[Exemplar], with_reasoning: bool) -> str:
    blocks = []
    for i, exemplar in enumerate(exemplars, 1):
        lines = [
            f"Example Sentence {i}: {exemplar.sentence}",
            f"Answer to Example {i}: {exemplar.answer}",
        ]
        if with_reasoning:
            lines.append(exemplar.reasoning)
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def build_prompt(
    instance: Instance,
    schema: RelationSchema,
    variant: PromptVariant,
    bank: ExemplarBank | None = None,
    seed: int = 0,
) -> RenderedPrompt:
    """Render one prompt; deterministic for fixed inputs.

    Few-shot variants require ``bank`` to hold enough exemplars for
    ``instance.pair_type``; zero-shot variants ignore it.
    """
    marked = mark_entities(instance)
    e1, e2 = instance.e1.surface, instance.e2.surface
    order = shuffle_options(schema.labels, seed, instance.id)
    option_texts = tuple(render_option(schema.templates[label], e1, e2) for label in order)
    options = _options_block(option_texts)

    exemplars: tuple[Exemplar, ...] = ()
    if variant.shot_count:
        if bank is None:
            raise PromptError(f"variant {variant.value} requires an exemplar bank")
        exemplars = bank.exemplars_for(instance.pair_type, variant)

    if variant is PromptVariant.SIMPLE:
        body = (
            f"In the context of this sentence: {marked} . Note the location of the {e1} "
            f"and {e2} as highlighted to help determine the relation given the listed "
            "options below."
        )
        instruction = ""
    elif variant is PromptVariant.FULL_INSTRUCTION:
        task = schema.task_description or DEFAULT_TASK_DESCRIPTION
        body = (
            f"{task} Given a single sentence: {marked} With 2 highlighted phrases: {e1} "
            f"and {e2}. Select a multiple choice answer from options below, which best "
            f"describes the relation between {e1} and {e2}."
        )
        instruction = ""
    else:
        target = (
            f"Following the example above, read through this sentence: {marked} . Given "
            f"the location of the {e1} and {e2} as highlighted, choose an answer from "
            "listed options below."
        )
        body = _examples_block(exemplars, variant.is_cot) + "\n" + target
        instruction = GENERIC_INSTRUCTION

    parts = {
        "instruction": instruction,
        "body": body,
        "options": options,
        "system": SYSTEM_ROLE,
    }
    text_parts = [instruction, body, options] if instruction else [body, options]
    return RenderedPrompt(
        instance_id=instance.id,
        variant=variant,
        text="\n\n".join(text_parts),
        option_order=order,
        option_texts=option_texts,
        shuffle_seed=seed,
        parts=parts,
    )


def backend_composition(
    variant: PromptVariant,
    backend_style: str,
    compositions: Mapping[str, Mapping[str, Sequence[str]]] | None = None,
) -> tuple[str, ...]:
    """Ordered part names for one (variant, backend style)."""
    styles = compositions if compositions is not None else DEFAULT_COMPOSITIONS
    if backend_style not in styles:
        raise PromptError(f"unknown backend style {backend_style!r}")
    by_category = styles[backend_style]
    try:
        return tuple(by_category[variant.category])
    except KeyError:
        raise PromptError(
            f"style {backend_style!r} has no composition for {variant.category}"
        ) from None


def compose_messages(prompt: RenderedPrompt, part_order: Sequence[str]) -> list[dict[str, str]]:
    """Turn named parts into role-tagged messages for the HTTP transport."""
    messages = []
    for part in part_order:
        content = prompt.parts.get(part, "")
        if not content:
            continue
        role = "system" if part == "system" else "user"
        messages.append({"role": role, "content": content})
    return messages
