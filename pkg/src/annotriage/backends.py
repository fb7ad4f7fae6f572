"""Annotator backends: a generic HTTP endpoint and a deterministic scripted mock.

Both speak the same interface: take a rendered prompt, return the raw text
plus measured token/char counts and latency. The mock replays a seeded
response profile so whole pipelines stay byte-reproducible; the HTTP
transport POSTs composed messages and retries transient failures.
"""

from __future__ import annotations

import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import httpx

from .dataset import Dataset
from .parsing import parse_response
from .prompting import (
    ExemplarBank,
    PromptVariant,
    RenderedPrompt,
    backend_composition,
    build_prompt,
    compose_messages,
)
from .parsing import AnnotationRecord
from .rng import SplitMix64, derive_key
from .runstore import EPOCH_TIMESTAMP, RunManifest, RunStore, RunTotals

logger = logging.getLogger(__name__)

_TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]")

# Free-text outputs the mock emits on its hallucination branch; each carries
# a recognizable relation style so downstream post-processing has work to do.
MOCK_HALLUCINATIONS = (
    "The two parties entered into a licensing agreement with each other.",
    "The company holds shares of the other entity.",
    "The person is a member of the board of directors.",
    "The first entity is a subsidiary of the second.",
    "These entities renewed their distribution agreement with new terms.",
)


class ConfigurationError(ValueError):
    """Backend configuration is unusable."""


class TransportError(RuntimeError):
    """The backend could not produce a response."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


def token_count(text: str) -> int:
    """Approximate token count: word and punctuation runs."""
    return len(_TOKEN_PATTERN.findall(text))


def char_count(text: str) -> int:
    """Unicode scalar count."""
    return len(text)


@dataclass(frozen=True)
class MockProfile:
    """Response distribution for the scripted annotator.

    Draws split into gold-correct, hallucinated free text, blank, and wrong
    label, in that order of probability mass. ``confusion`` biases the wrong
    branch toward a specific distractor per gold label. When an instance has
    no gold label the correct branch falls through to the wrong branch.
    """

    accuracy: float
    hallucination_rate: float = 0.0
    blank_rate: float = 0.0
    confusion: Mapping[str, str] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name in ("accuracy", "hallucination_rate", "blank_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"mock profile: {name}={value} outside [0,1]")
        if self.accuracy + self.hallucination_rate + self.blank_rate > 1.0 + 1e-12:
            raise ConfigurationError("mock profile: branch probabilities exceed 1")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "hallucination_rate": self.hallucination_rate,
            "blank_rate": self.blank_rate,
            "confusion": dict(self.confusion),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class HttpTransport:
    endpoint: str
    auth_env: str
    model: str

    def to_dict(self) -> dict:
        return {"endpoint": self.endpoint, "auth_env": self.auth_env, "model": self.model}


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 0.5

    def to_dict(self) -> dict:
        return {"max_attempts": self.max_attempts, "backoff_seconds": self.backoff_seconds}


@dataclass(frozen=True)
class BackendConfig:
    """One annotator endpoint plus its decoding and execution settings."""

    name: str
    style: str = "deferred_system"
    temperature: float = 0.2
    mock: MockProfile | None = None
    http: HttpTransport | None = None
    seed: int | None = None
    max_parallel: int = 1
    retry: RetryPolicy = RetryPolicy()
    pricing: str = ""

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigurationError(f"backend {self.name}: temperature outside [0,2]")
        if self.max_parallel < 1:
            raise ConfigurationError(f"backend {self.name}: max_parallel must be >= 1")
        if (self.mock is None) == (self.http is None):
            raise ConfigurationError(
                f"backend {self.name}: exactly one of mock/http transport required"
            )

    @property
    def is_mock(self) -> bool:
        return self.mock is not None

    def to_dict(self) -> dict:
        data: dict = {
            "name": self.name,
            "style": self.style,
            "temperature": self.temperature,
            "seed": self.seed,
            "max_parallel": self.max_parallel,
            "retry": self.retry.to_dict(),
            "pricing": self.pricing,
        }
        if self.mock is not None:
            data["mock"] = self.mock.to_dict()
        if self.http is not None:
            data["http"] = self.http.to_dict()
        return data

    @classmethod
    def from_dict(cls, name: str, data: Mapping) -> "BackendConfig":
        mock = data.get("mock")
        http = data.get("http")
        retry = data.get("retry", {})
        return cls(
            name=name,
            style=data.get("style", "deferred_system"),
            temperature=float(data.get("temperature", 0.2)),
            mock=MockProfile(
                accuracy=float(mock["accuracy"]),
                hallucination_rate=float(mock.get("hallucination_rate", 0.0)),
                blank_rate=float(mock.get("blank_rate", 0.0)),
                confusion=dict(mock.get("confusion", {})),
                seed=int(mock.get("seed", 0)),
            )
            if mock is not None
            else None,
            http=HttpTransport(
                endpoint=http["endpoint"],
                auth_env=http.get("auth_env", ""),
                model=http.get("model", ""),
            )
            if http is not None
            else None,
            seed=data.get("seed"),
            max_parallel=int(data.get("max_parallel", 1)),
            retry=RetryPolicy(
                max_attempts=int(retry.get("max_attempts", 3)),
                backoff_seconds=float(retry.get("backoff_seconds", 0.5)),
            ),
            pricing=data.get("pricing", ""),
        )


@dataclass(frozen=True)
class RawResponse:
    """Verbatim backend output plus usage measurements."""

    instance_id: str
    backend: str
    variant: str
    run_index: int
    text: str
    input_tokens: int
    output_tokens: int
    input_chars: int
    output_chars: int
    latency: float


def _mock_text(
    prompt: RenderedPrompt,
    config: BackendConfig,
    run_index: int,
    gold_label: str | None,
) -> tuple[str, float]:
    profile = config.mock
    rng = SplitMix64(
        derive_key(
            profile.seed,
            "mock",
            config.name,
            prompt.instance_id,
            prompt.variant.value,
            f"{config.temperature:g}",
            f"run{run_index}",
        )
    )
    draw = rng.uniform()
    option_by_label = dict(zip(prompt.option_order, prompt.option_texts))

    def wrong_label() -> str:
        biased = profile.confusion.get(gold_label or "")
        if biased and biased in option_by_label and biased != gold_label:
            return option_by_label[biased]
        alternatives = [label for label in prompt.option_order if label != gold_label]
        if not alternatives:
            alternatives = list(prompt.option_order)
        return option_by_label[rng.choice(alternatives)]

    boundary_correct = profile.accuracy
    boundary_hallucination = boundary_correct + profile.hallucination_rate
    boundary_blank = boundary_hallucination + profile.blank_rate
    if draw < boundary_correct and gold_label is not None:
        text = option_by_label[gold_label]
    elif draw < boundary_hallucination:
        text = rng.choice(MOCK_HALLUCINATIONS)
    elif draw < boundary_blank:
        text = ""
    else:
        text = wrong_label()
    latency = round(0.8 + 0.4 * rng.uniform(), 6)
    return text, latency


def _extract_http_text(data) -> str:
    if isinstance(data, Mapping):
        if isinstance(data.get("text"), str):
            return data["text"]
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            message = choices[0].get("message", {})
            if isinstance(message.get("content"), str):
                return message["content"]
    raise TransportError("response JSON has neither 'text' nor chat-style 'choices'")


def _http_usage(data, key_pairs) -> int | None:
    usage = data.get("usage") if isinstance(data, Mapping) else None
    if not isinstance(usage, Mapping):
        return None
    for key in key_pairs:
        if isinstance(usage.get(key), int):
            return usage[key]
    return None


def _http_call(
    prompt: RenderedPrompt,
    config: BackendConfig,
    run_index: int,
    client: httpx.Client | None,
    compositions=None,
) -> RawResponse:
    transport = config.http
    token = os.environ.get(transport.auth_env) if transport.auth_env else ""
    if transport.auth_env and token is None:
        raise ConfigurationError(
            f"backend {config.name}: auth env var {transport.auth_env} is not set"
        )
    order = backend_composition(prompt.variant, config.style, compositions)
    payload: dict = {
        "model": transport.model,
        "messages": compose_messages(prompt, order),
        "temperature": config.temperature,
    }
    if config.seed is not None:
        payload["seed"] = config.seed
    headers = {"Authorization": f"Bearer {token}"} if token else {}

    owns_client = client is None
    if owns_client:
        client = httpx.Client(timeout=60.0)
    attempts = 0
    try:
        while True:
            attempts += 1
            started = time.perf_counter()
            try:
                response = client.post(transport.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                if attempts >= config.retry.max_attempts:
                    raise TransportError(
                        f"backend {config.name}: {exc} after {attempts} attempt(s)",
                        attempts=attempts,
                    ) from exc
                time.sleep(config.retry.backoff_seconds * 2 ** (attempts - 1))
                continue
            elapsed = time.perf_counter() - started
            if response.status_code == 429 or response.status_code >= 500:
                if attempts >= config.retry.max_attempts:
                    raise TransportError(
                        f"backend {config.name}: HTTP {response.status_code} "
                        f"after {attempts} attempt(s)",
                        attempts=attempts,
                    )
                time.sleep(config.retry.backoff_seconds * 2 ** (attempts - 1))
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"backend {config.name}: HTTP {response.status_code}: "
                    f"{response.text[:200]}",
                    attempts=attempts,
                )
            data = response.json()
            text = _extract_http_text(data)
            input_text = "\n".join(m["content"] for m in payload["messages"])
            return RawResponse(
                instance_id=prompt.instance_id,
                backend=config.name,
                variant=prompt.variant.value,
                run_index=run_index,
                text=text,
                input_tokens=_http_usage(data, ("input_tokens", "prompt_tokens"))
                or token_count(input_text),
                output_tokens=_http_usage(data, ("output_tokens", "completion_tokens"))
                or token_count(text),
                input_chars=char_count(input_text),
                output_chars=char_count(text),
                latency=elapsed,
            )
    finally:
        if owns_client:
            client.close()


def annotate_one(
    prompt: RenderedPrompt,
    config: BackendConfig,
    run_index: int = 1,
    gold_label: str | None = None,
    client: httpx.Client | None = None,
    compositions=None,
) -> RawResponse:
    """Send one prompt to the configured backend and measure the response."""
    if config.is_mock:
        text, latency = _mock_text(prompt, config, run_index, gold_label)
        return RawResponse(
            instance_id=prompt.instance_id,
            backend=config.name,
            variant=prompt.variant.value,
            run_index=run_index,
            text=text,
            input_tokens=token_count(prompt.text),
            output_tokens=token_count(text),
            input_chars=char_count(prompt.text),
            output_chars=char_count(text),
            latency=latency,
        )
    return _http_call(prompt, config, run_index, client, compositions)


def run_id_for(config: BackendConfig, variant: PromptVariant, run_index: int, seed: int) -> str:
    return f"{config.name}_{variant.value}_t{config.temperature:g}_s{seed}_r{run_index}"


def run_annotation(
    dataset: Dataset,
    bank: ExemplarBank | None,
    config: BackendConfig,
    variant: PromptVariant,
    run_index: int,
    store: RunStore,
    seed: int | None = None,
    dataset_fingerprint: str = "",
    lexicon: Mapping[str, Sequence[str]] | None = None,
    client: httpx.Client | None = None,
    compositions=None,
) -> RunManifest:
    """Annotate every instance and finish with a manifest.

    Already-persisted instance ids are skipped, so an interrupted run can be
    re-invoked and only the missing records are requested. Any per-instance
    failure leaves the manifest unwritten.
    """
    run_seed = seed if seed is not None else (config.seed or 0)
    done = store.existing_ids()
    todo = [inst for inst in dataset.instances if inst.id not in done]

    def annotate(instance) -> AnnotationRecord:
        prompt = build_prompt(
            instance, dataset.schema_for(instance), variant, bank, seed=run_seed
        )
        response = annotate_one(
            prompt,
            config,
            run_index=run_index,
            gold_label=instance.gold_label,
            client=client,
            compositions=compositions,
        )
        parsed = parse_response(response.text, prompt.option_order, prompt.option_texts, lexicon)
        return AnnotationRecord(
            instance_id=instance.id,
            backend=config.name,
            variant=variant.value,
            temperature=config.temperature,
            run_index=run_index,
            raw=response.text,
            parsed=parsed,
            option_order=prompt.option_order,
            input_tokens=response.input_tokens,
            output_tokens=response.output_tokens,
            input_chars=response.input_chars,
            output_chars=response.output_chars,
            latency=response.latency,
        )

    started = time.perf_counter()
    failures = 0
    if config.max_parallel > 1 and todo:
        # The store stays single-writer: futures may finish out of order but
        # results are consumed and appended in instance order.
        with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
            futures = [pool.submit(annotate, instance) for instance in todo]
            for instance, future in zip(todo, futures):
                try:
                    store.append(future.result())
                except (TransportError, ConfigurationError) as exc:
                    failures += 1
                    logger.error("instance %s failed: %s", instance.id, exc)
    else:
        for instance in todo:
            try:
                store.append(annotate(instance))
            except (TransportError, ConfigurationError) as exc:
                failures += 1
                logger.error("instance %s failed: %s", instance.id, exc)
    if failures:
        raise TransportError(
            f"run incomplete: {failures} instance(s) failed; manifest not written",
            attempts=failures,
        )

    records = store.load_records()
    totals = RunTotals(
        instances=len(records),
        input_tokens=sum(r.input_tokens for r in records),
        output_tokens=sum(r.output_tokens for r in records),
        input_chars=sum(r.input_chars for r in records),
        output_chars=sum(r.output_chars for r in records),
        wall_seconds=round(sum(r.latency for r in records), 6)
        if config.is_mock
        else round(time.perf_counter() - started, 6),
    )
    manifest = RunManifest(
        run_id=run_id_for(config, variant, run_index, run_seed),
        backend=config.to_dict(),
        variant=variant.value,
        temperature=config.temperature,
        seed=run_seed,
        run_index=run_index,
        dataset_fingerprint=dataset_fingerprint,
        totals=totals,
        # Mock runs are reproducible artifacts; a wall-clock timestamp would
        # break byte-identical reruns, so they pin the epoch.
        created_at=EPOCH_TIMESTAMP
        if config.is_mock
        else time.strftime("%Y-%m-%dT%H:%M:%S+00:00", time.gmtime()),
    )
    store.write_manifest(manifest)
    return manifest
