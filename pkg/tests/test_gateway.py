from __future__ import annotations

import json
import threading
import time

import httpx
import pytest

from lessonforge.errors import (
    ProviderTimeout,
    ProviderUnavailable,
    SchemaViolationExhausted,
)
from lessonforge.gateway import (
    Gateway,
    GenerationRequest,
    Persona,
    ProviderConfig,
    RemoteProvider,
    TaskTag,
    assert_persona_isolation,
    generate,
    text_windows,
)
from lessonforge.serialization import canonical_compact

from .conftest import make_gateway

VALID_QUIZ = {
    "questions": [
        {
            "stem": f"Which fact about rivers is stated in part {i}?",
            "options": ["Rivers carry water", f"Distractor one {i}", f"Distractor two {i}"],
            "correct_index": 0,
            "difficulty": ["easy", "medium", "hard"][i % 3],
            "topic_tag": "rivers",
        }
        for i in range(6)
    ]
}


def quiz_request(seed=0):
    return GenerationRequest(
        task_tag=TaskTag.quiz,
        context_parts=(("section_text", "Rivers carry water downhill."),),
        seed=seed,
    )


def test_mock_scripted_passthrough():
    gw = make_gateway(script=[{"task_tag": "quiz", "payload": VALID_QUIZ}])
    response = gw.generate(quiz_request())
    assert response.payload == VALID_QUIZ
    assert response.attempts == 1


def test_retry_invalid_then_valid():
    bad = {"questions": []}
    gw = make_gateway(script=[{"task_tag": "quiz", "payloads": [bad, VALID_QUIZ]}])
    response = gw.generate(quiz_request())
    assert response.payload == VALID_QUIZ
    assert response.attempts == 2


def test_exhaustion_after_max_retries():
    bad = {"questions": []}
    gw = make_gateway(script=[{"task_tag": "quiz", "payload": bad}], max_retries=1)
    with pytest.raises(SchemaViolationExhausted) as exc:
        gw.generate(quiz_request())
    assert len(exc.value.attempts) == 2
    assert exc.value.task_tag == "quiz"


def test_retry_appends_feedback_to_context():
    seen = []

    class SpyProvider:
        def complete(self, request):
            seen.append(request)
            return {"questions": []} if len(seen) == 1 else VALID_QUIZ

    gw = make_gateway()
    gw.provider = SpyProvider()
    gw.generate(quiz_request())
    assert seen[0].feedback_count() == 0
    assert seen[1].feedback_count() == 1
    label, text = seen[1].context_parts[-1]
    assert label.startswith("validation_feedback")
    assert "rejected" in text


def test_mock_determinism():
    req = GenerationRequest(
        task_tag=TaskTag.mnemonic,
        context_parts=(("items", json.dumps(["Kingdom", "Phylum", "Class"])),),
        seed=11,
    )
    out1 = make_gateway().generate(req).payload
    out2 = make_gateway().generate(req).payload
    assert canonical_compact(out1) == canonical_compact(out2)


def test_mock_seed_changes_fallback():
    base = GenerationRequest(
        task_tag=TaskTag.rewrite_segment,
        context_parts=(("interest", "music"), ("segment_text", "Rivers carry water.")),
        seed=1,
    )
    other = GenerationRequest(
        task_tag=base.task_tag, context_parts=base.context_parts, seed=2
    )
    gw = make_gateway()
    # deterministic per seed; both schema-valid
    assert gw.generate(base).payload == gw.generate(base).payload
    assert gw.generate(other).payload["text"]


def test_fallback_valid_for_every_tag(forces_doc):
    from lessonforge import LearnerProfile, PipelineConfig
    from lessonforge.personalization import personalize

    # the full pipeline smoke (every tag) is covered by test_pipeline; here,
    # spot-check tags that take bare context
    gw = make_gateway()
    for tag, parts in [
        (TaskTag.timeline, (("section_heading", "T"), ("section_text", "Alpha comes first. Bravo follows next. Charlie arrives third. Delta ends it."))),
        (TaskTag.mnemonic, (("items", json.dumps(["red", "green", "blue"])),)),
        (TaskTag.quiz_feedback, (("result", json.dumps({"score": 0.5, "glows": [], "grows": ["x"]})),)),
        (TaskTag.embedded_question, (("anchor_id", "b-1"), ("anchor_text", "Rivers carry sand downhill to the sea."))),
    ]:
        response = gw.generate(GenerationRequest(task_tag=tag, context_parts=parts, seed=3))
        assert response.payload is not None


def test_unique_context_labels_enforced():
    with pytest.raises(ValueError):
        GenerationRequest(
            task_tag=TaskTag.quiz,
            context_parts=(("a", "x"), ("a", "y")),
        )


def test_max_parallel_bound_under_stress():
    class SlowProvider:
        def complete(self, request):
            time.sleep(0.02)
            return {"text": "ok"}

    gw = make_gateway(max_parallel=3)
    gw.provider = SlowProvider()
    req = GenerationRequest(
        task_tag=TaskTag.rewrite_segment,
        context_parts=(("segment_text", "x"),),
    )
    threads = [threading.Thread(target=lambda: gw.generate(req)) for _ in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert gw.total_requests == 12
    assert gw.max_in_flight_observed <= 3
    assert gw.in_flight == 0


def test_persona_isolation_checks():
    req = GenerationRequest(
        task_tag=TaskTag.dialogue_turn,
        persona=Persona.student,
        context_parts=(("history", "teacher said hello there"),),
    )
    assert assert_persona_isolation(req, []) is True
    assert assert_persona_isolation(req, ["the original source sentence"]) is True
    assert assert_persona_isolation(req, ["said hello"]) is False
    # whitespace-normalized matching
    spaced = GenerationRequest(
        task_tag=TaskTag.dialogue_turn,
        context_parts=(("history", "alpha   beta\n gamma"),),
    )
    assert assert_persona_isolation(spaced, ["alpha beta gamma"]) is False


def test_text_windows():
    windows = text_windows("abc def ghi jkl mno pqr", k=20)
    assert all(len(w) == 20 for w in windows)
    assert text_windows("short", k=20) == {"short"}
    assert text_windows("", k=20) == set()


def test_one_shot_generate_helper():
    response = generate(
        GenerationRequest(
            task_tag=TaskTag.rewrite_segment,
            context_parts=(("interest", "music"), ("segment_text", "hello")),
        ),
        ProviderConfig(kind="mock"),
    )
    assert response.payload["text"]


# --- remote provider --------------------------------------------------------


def _remote_gateway(handler, **cfg_kwargs):
    cfg = ProviderConfig(kind="remote", endpoint="http://provider.test/generate", **cfg_kwargs)
    gw = Gateway(cfg)
    gw.provider = RemoteProvider(
        cfg.endpoint, cfg.timeout_ms, transport=httpx.MockTransport(handler)
    )
    return gw


def test_remote_provider_round_trip():
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        assert body["task_tag"] == "rewrite_segment"
        assert body["context_parts"][0] == {"label": "segment_text", "text": "hi"}
        return httpx.Response(200, json={"payload": {"text": "rewritten"}, "provider_meta": {}})

    gw = _remote_gateway(handler)
    response = gw.generate(
        GenerationRequest(
            task_tag=TaskTag.rewrite_segment, context_parts=(("segment_text", "hi"),)
        )
    )
    assert response.payload == {"text": "rewritten"}


def test_remote_provider_http_error():
    gw = _remote_gateway(lambda request: httpx.Response(503))
    with pytest.raises(ProviderUnavailable):
        gw.generate(
            GenerationRequest(
                task_tag=TaskTag.rewrite_segment, context_parts=(("segment_text", "hi"),)
            )
        )


def test_remote_provider_timeout():
    def handler(request):
        raise httpx.ConnectTimeout("boom")

    gw = _remote_gateway(handler)
    with pytest.raises(ProviderTimeout):
        gw.generate(
            GenerationRequest(
                task_tag=TaskTag.rewrite_segment, context_parts=(("segment_text", "hi"),)
            )
        )


def test_remote_requires_endpoint(monkeypatch):
    monkeypatch.delenv("LESSONFORGE_PROVIDER_ENDPOINT", raising=False)
    with pytest.raises(ValueError):
        ProviderConfig(kind="remote")
    monkeypatch.setenv("LESSONFORGE_PROVIDER_ENDPOINT", "http://env.test")
    ProviderConfig(kind="remote")  # env override satisfies the requirement
