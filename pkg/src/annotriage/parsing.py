"""Map raw annotator text to a canonical label, a blank, or a hallucination.

The resolution cascade is fixed and total:

1. empty or whitespace-only output -> blank
2. a leading (optionally quoted) option number -> that displayed option
3. normalized match of an option's rendered text or canonical id -> that label
4. anything else -> hallucination, optionally mapped to a relation style

Blanks stay a distinct outcome rather than being folded into the negative
class, and numbered answers win over text matches because the prompts ask
for a multiple choice answer.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

LABEL = "label"
BLANK = "blank"
HALLUCINATION = "hallucination"

# Relation styles commonly found in free-text outputs, checked in order.
DEFAULT_STYLE_LEXICON: dict[str, tuple[str, ...]] = {
    "agreement_with": ("agreement with", "agreements with", "agreement between"),
    "shares_of": ("shares of", "share of", "stake in", "interest in"),
    "member_of": ("member of", "board member", "director of"),
    "subsidiary_of": ("subsidiary of", "subsidiaries of", "parent of", "owned by"),
}

_ANSWER_PREFIX = re.compile(r"^\s*(?:final\s+)?answer\s*(?:is)?\s*[:\-]\s*", re.IGNORECASE)
_LEADING_NUMBER = re.compile(r"""^["'“‘`“]?\s*(\d{1,3})\s*["'”’`”]?(?:[.):\-]|\s|$)""")
_WHITESPACE = re.compile(r"\s+")
_TERMINAL_PUNCT = ".!?;:,\"'`”’"


@dataclass(frozen=True)
class ParsedLabel:
    """Outcome of parsing one raw response."""

    kind: str  # LABEL | BLANK | HALLUCINATION
    label: str | None = None  # canonical id, kind == LABEL only
    text: str = ""  # normalized raw text, kind == HALLUCINATION only
    style: str | None = None  # mapped relation style, if any

    @classmethod
    def from_label(cls, label: str) -> "ParsedLabel":
        return cls(kind=LABEL, label=label)

    @classmethod
    def blank(cls) -> "ParsedLabel":
        return cls(kind=BLANK)

    @classmethod
    def hallucination(cls, text: str, style: str | None = None) -> "ParsedLabel":
        return cls(kind=HALLUCINATION, text=text, style=style)

    @property
    def is_label(self) -> bool:
        return self.kind == LABEL

    def category(self) -> str:
        """Agreement category: one per label, plus blank and hallucination."""
        return f"label:{self.label}" if self.kind == LABEL else self.kind

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind}
        if self.label is not None:
            data["label"] = self.label
        if self.text:
            data["text"] = self.text
        if self.style is not None:
            data["style"] = self.style
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ParsedLabel":
        return cls(
            kind=data["kind"],
            label=data.get("label"),
            text=data.get("text", ""),
            style=data.get("style"),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's response for one instance under one configuration."""

    instance_id: str
    backend: str
    variant: str
    temperature: float
    run_index: int
    raw: str
    parsed: ParsedLabel
    option_order: tuple[str, ...]
    input_tokens: int = 0
    output_tokens: int = 0
    input_chars: int = 0
    output_chars: int = 0
    latency: float = 0.0

    @property
    def annotator(self) -> str:
        """Stable annotator id for agreement and vote bookkeeping."""
        return f"{self.backend}/{self.variant}/t{self.temperature:g}/r{self.run_index}"

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "backend": self.backend,
            "variant": self.variant,
            "temperature": self.temperature,
            "run_index": self.run_index,
            "raw": self.raw,
            "parsed": self.parsed.to_dict(),
            "option_order": list(self.option_order),
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "input_chars": self.input_chars,
            "output_chars": self.output_chars,
            "latency": self.latency,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnnotationRecord":
        return cls(
            instance_id=data["instance_id"],
            backend=data["backend"],
            variant=data["variant"],
            temperature=float(data["temperature"]),
            run_index=int(data["run_index"]),
            raw=data["raw"],
            parsed=ParsedLabel.from_dict(data["parsed"]),
            option_order=tuple(data["option_order"]),
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            input_chars=int(data.get("input_chars", 0)),
            output_chars=int(data.get("output_chars", 0)),
            latency=float(data.get("latency", 0.0)),
        )


def normalize(text: str) -> str:
    """Case fold, collapse whitespace, strip terminal punctuation."""
    folded = unicodedata.normalize("NFKC", text).casefold()
    collapsed = _WHITESPACE.sub(" ", folded).strip()
    return collapsed.rstrip(_TERMINAL_PUNCT).strip()


def _strip_decorations(raw: str) -> str:
    text = raw.strip()
    text = _ANSWER_PREFIX.sub("", text)
    return text.strip()


def parse_response(
    raw: str,
    option_order: Sequence[str],
    option_texts: Sequence[str],
    lexicon: Mapping[str, Sequence[str]] | None = None,
) -> ParsedLabel:
    """Resolve raw annotator text against the displayed options.

    ``option_order`` and ``option_texts`` must come from the same
    :class:`~annotriage.prompting.RenderedPrompt`.
    """
    if len(option_order) != len(option_texts):
        raise ValueError("option_order and option_texts must align")
    if not raw.strip():
        return ParsedLabel.blank()

    text = _strip_decorations(raw)
    match = _LEADING_NUMBER.match(text)
    if match:
        index = int(match.group(1))
        if 1 <= index <= len(option_order):
            return ParsedLabel.from_label(option_order[index - 1])

    norm = normalize(text)
    for label, rendered in zip(option_order, option_texts):
        candidates = (normalize(rendered), normalize(label), normalize(label.replace("_", " ")))
        if norm in candidates:
            return ParsedLabel.from_label(label)

    return ParsedLabel.hallucination(norm, canonicalize_hallucination(norm, lexicon))


def canonicalize_hallucination(
    text: str, lexicon: Mapping[str, Sequence[str]] | None = None
) -> str | None:
    """Map hallucinated free text to a known relation style, if any phrase matches."""
    styles = lexicon if lexicon is not None else DEFAULT_STYLE_LEXICON
    norm = normalize(text)
    for style, phrases in styles.items():
        for phrase in phrases:
            if normalize(phrase) in norm:
                return style
    return None


def load_style_lexicon(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Load a style -> phrase-pattern lexicon from JSON."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    return {style: tuple(phrases) for style, phrases in raw.items()}
