"""Provider abstraction for every generative call.

All content generation flows through :class:`Gateway`, which:

* bounds in-flight requests (``max_parallel``) and keeps counters,
* validates every response against its task tag's schema plus any
  caller-supplied contextual validator,
* retries schema violations with the violation summary appended to the
  request context, and surfaces the full diagnostic trail on exhaustion,
* never emits a payload that fails validation.

Two providers exist: a deterministic scripted mock (the whole primary test
suite runs hermetically on it) and a remote HTTP provider speaking the JSON
wire contract documented in the README.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Protocol

import httpx

from .errors import ProviderTimeout, ProviderUnavailable, SchemaViolationExhausted
from .schemas import validate_payload
from .serialization import canonical_compact

ENDPOINT_ENV_VAR = "LESSONFORGE_PROVIDER_ENDPOINT"
FEEDBACK_LABEL_PREFIX = "validation_feedback_"


class TaskTag(str, Enum):
    relevel = "relevel"
    select_segments = "select_segments"
    rewrite_segment = "rewrite_segment"
    slides = "slides"
    narration = "narration"
    concept_graph = "concept_graph"
    dialogue_turn = "dialogue_turn"
    mindmap = "mindmap"
    timeline = "timeline"
    mnemonic = "mnemonic"
    illustration_brief = "illustration_brief"
    embedded_question = "embedded_question"
    quiz = "quiz"
    quiz_feedback = "quiz_feedback"


class Persona(str, Enum):
    default = "default"
    teacher = "teacher"
    student = "student"


@dataclass(frozen=True)
class GenerationRequest:
    """One generative call: tag fixes the response schema, persona scopes context."""

    task_tag: TaskTag
    persona: Persona = Persona.default
    context_parts: tuple[tuple[str, str], ...] = ()
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        labels = [label for label, _ in self.context_parts]
        if len(labels) != len(set(labels)):
            raise ValueError("context part labels must be unique")

    def part(self, label: str) -> str | None:
        for lab, text in self.context_parts:
            if lab == label:
                return text
        return None

    def with_part(self, label: str, text: str) -> "GenerationRequest":
        return replace(self, context_parts=self.context_parts + ((label, text),))

    def feedback_count(self) -> int:
        return sum(1 for lab, _ in self.context_parts if lab.startswith(FEEDBACK_LABEL_PREFIX))

    def fingerprint(self) -> str:
        return canonical_compact(
            {
                "task_tag": self.task_tag.value,
                "persona": self.persona.value,
                "context_parts": [[l, t] for l, t in self.context_parts],
                "params": self.params,
                "seed": self.seed,
            }
        )


@dataclass(frozen=True)
class GenerationResponse:
    payload: Any
    provider_meta: dict[str, Any] = field(default_factory=dict)

    @property
    def attempts(self) -> int:
        return int(self.provider_meta.get("attempts", 1))


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "mock"  # "mock" | "remote"
    endpoint: str | None = None
    max_parallel: int = 4
    max_retries: int = 2
    timeout_ms: int = 30_000

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.kind == "remote" and not (self.endpoint or os.environ.get(ENDPOINT_ENV_VAR)):
            raise ValueError(f"remote provider needs an endpoint (or {ENDPOINT_ENV_VAR})")


class Provider(Protocol):
    def complete(self, request: GenerationRequest) -> Any:
        """Return a raw payload for the request; may be schema-invalid."""
        ...


class MockProvider:
    """Deterministic scripted provider; see the script format in the README.

    Resolution order: first script rule whose tag/persona/substring matcher
    accepts the request; otherwise the deterministic fallback synthesizer.
    A rule carrying ``payloads`` (a list) is indexed by the request's retry
    attempt, which the request itself encodes as the number of validation
    feedback parts — the provider holds no mutable state, so identical
    (request, seed, script) triples give identical responses even under
    concurrency.
    """

    def __init__(self, script: list[dict] | None = None):
        self.script = list(script or [])
        for i, rule in enumerate(self.script):
            if "task_tag" not in rule:
                raise ValueError(f"script rule {i} missing 'task_tag'")
            if "payload" not in rule and "payloads" not in rule:
                raise ValueError(f"script rule {i} needs 'payload' or 'payloads'")

    @staticmethod
    def _matches(rule: dict, request: GenerationRequest) -> bool:
        if rule["task_tag"] != request.task_tag.value:
            return False
        match = rule.get("match") or {}
        if "persona" in match and match["persona"] != request.persona.value:
            return False
        if "seed" in match and match["seed"] != request.seed:
            return False
        if "contains" in match:
            needle = match["contains"]
            if "part_label" in match:
                hay = request.part(match["part_label"]) or ""
                return needle in hay
            return any(needle in text for _, text in request.context_parts)
        if "part_label" in match:
            return request.part(match["part_label"]) is not None
        return True

    def complete(self, request: GenerationRequest) -> Any:
        for rule in self.script:
            if self._matches(rule, request):
                if "payloads" in rule:
                    seq = rule["payloads"]
                    return seq[min(request.feedback_count(), len(seq) - 1)]
                return rule["payload"]
        from .mocksynth import synthesize  # local import: synth depends on nothing here

        return synthesize(request)


class RemoteProvider:
    """HTTP JSON provider. POST {task_tag, persona, context_parts, params, seed}."""

    def __init__(self, endpoint: str, timeout_ms: int, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout_ms / 1000.0, transport=transport)

    def complete(self, request: GenerationRequest) -> Any:
        body = {
            "task_tag": request.task_tag.value,
            "persona": request.persona.value,
            "context_parts": [{"label": l, "text": t} for l, t in request.context_parts],
            "params": request.params,
            "seed": request.seed,
        }
        try:
            resp = self._client.post(self.endpoint, json=body)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"provider timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"provider unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"provider returned HTTP {resp.status_code}")
        return resp.json().get("payload")


def build_provider(
    cfg: ProviderConfig,
    script: list[dict] | None = None,
    transport: httpx.BaseTransport | None = None,
) -> Provider:
    if cfg.kind == "mock":
        return MockProvider(script)
    endpoint = cfg.endpoint or os.environ[ENDPOINT_ENV_VAR]
    return RemoteProvider(endpoint, cfg.timeout_ms, transport)


class Gateway:
    """Validate-and-retry front door shared by all generation operations.

    Thread-safe: requests may be issued concurrently up to ``max_parallel``;
    counters are lock-guarded; responses are independent values.
    """

    def __init__(
        self,
        cfg: ProviderConfig,
        script: list[dict] | None = None,
        transport: httpx.BaseTransport | None = None,
        record_requests: bool = False,
    ):
        self.cfg = cfg
        self.provider = build_provider(cfg, script=script, transport=transport)
        self._semaphore = threading.BoundedSemaphore(cfg.max_parallel)
        self._lock = threading.Lock()
        self.total_requests = 0
        self.in_flight = 0
        self.max_in_flight_observed = 0
        self._record = record_requests
        self.request_log: list[GenerationRequest] = []

    def _enter(self, request: GenerationRequest) -> None:
        self._semaphore.acquire()
        with self._lock:
            self.total_requests += 1
            self.in_flight += 1
            self.max_in_flight_observed = max(self.max_in_flight_observed, self.in_flight)
            if self._record:
                self.request_log.append(request)

    def _exit(self) -> None:
        with self._lock:
            self.in_flight -= 1
        self._semaphore.release()

    def generate(
        self,
        request: GenerationRequest,
        extra_validator: Callable[[Any], list[str]] | None = None,
    ) -> GenerationResponse:
        """Run the validate-retry loop; never returns an invalid payload.

        Raises:
            SchemaViolationExhausted: every attempt failed validation; the
                error carries each attempt's diagnostics.
            ProviderUnavailable / ProviderTimeout: transport-level failures.
        """
        attempts_diags: list[list[str]] = []
        current = request
        for attempt in range(self.cfg.max_retries + 1):
            self._enter(current)
            try:
                payload = self.provider.complete(current)
            finally:
                self._exit()
            violations = validate_payload(current.task_tag.value, payload, current.params)
            if not violations and extra_validator is not None:
                violations = list(extra_validator(payload) or [])
            if not violations:
                return GenerationResponse(
                    payload=payload,
                    provider_meta={"attempts": attempt + 1, "provider": self.cfg.kind},
                )
            attempts_diags.append(violations)
            current = current.with_part(
                f"{FEEDBACK_LABEL_PREFIX}{attempt + 1}",
                "previous response rejected: " + "; ".join(violations),
            )
        raise SchemaViolationExhausted(request.task_tag.value, attempts_diags)


def generate(request: GenerationRequest, cfg: ProviderConfig) -> GenerationResponse:
    """One-shot convenience wrapper over a throwaway :class:`Gateway`."""
    return Gateway(cfg).generate(request)


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def text_windows(text: str, k: int = 20) -> set[str]:
    """All k-character windows of the whitespace-normalized text."""
    norm = normalize_ws(text)
    if len(norm) < k:
        return {norm} if norm else set()
    return {norm[i : i + k] for i in range(len(norm) - k + 1)}


def assert_persona_isolation(request: GenerationRequest, forbidden_texts: list[str]) -> bool:
    """True iff no context part contains any forbidden text as a substring.

    Comparison happens after whitespace normalization on both sides; empty
    forbidden entries are ignored (vacuous). Needles are grouped by length
    and matched via sliding-window set lookups, which keeps the check linear
    when the forbidden list is a large family of fixed-size windows.
    """
    by_length: dict[int, set[str]] = {}
    for f in forbidden_texts:
        norm = normalize_ws(f)
        if norm:
            by_length.setdefault(len(norm), set()).add(norm)
    if not by_length:
        return True
    for _, text in request.context_parts:
        hay = normalize_ws(text)
        for length, needles in by_length.items():
            if length > len(hay):
                continue
            for i in range(len(hay) - length + 1):
                if hay[i : i + length] in needles:
                    return False
    return True
