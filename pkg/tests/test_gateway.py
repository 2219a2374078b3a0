"""Tests for model routing, the four gateway modes, and request digests."""

from __future__ import annotations

import pytest

from issuetraj.errors import (
    GatewayFailure,
    ReplayMiss,
    StubExhausted,
    UnknownRole,
    UnsupportedPayload,
)
from issuetraj.gateway import DEFAULT_ROUTES, LlmGateway, ModelRoute, Role, request_digest


class TestRouting:
    def test_label_classifier_route(self, stub_gateway):
        route = stub_gateway.route_for(Role.LABEL_CLASSIFIER)
        assert (route.temperature, route.max_output_tokens) == (0.0, 128)

    def test_field_bucket_classifier_route(self, stub_gateway):
        route = stub_gateway.route_for(Role.FIELD_BUCKET_CLASSIFIER)
        assert (route.temperature, route.max_output_tokens) == (0.0, 256)

    def test_generative_roles_route(self, stub_gateway):
        for role in (Role.COMMENT_ANALYST, Role.LINK_SUMMARIZER, Role.TRAJECTORY_SYNTHESIZER):
            route = stub_gateway.route_for(role)
            assert (route.temperature, route.max_output_tokens) == (0.2, 4096)

    def test_vision_shares_summarizer_route_family(self, stub_gateway):
        vision = stub_gateway.route_for(Role.VISION_DESCRIBER)
        summarizer = stub_gateway.route_for(Role.LINK_SUMMARIZER)
        assert vision.model_id == summarizer.model_id
        assert (vision.temperature, vision.max_output_tokens) == (0.2, 4096)

    def test_judge_is_deterministic(self, stub_gateway):
        route = stub_gateway.route_for(Role.QUALITY_JUDGE)
        assert route.temperature == 0.0

    def test_unknown_role_raises(self, stub_gateway):
        with pytest.raises(UnknownRole):
            stub_gateway.route_for("not_a_role")

    def test_config_overrides_route(self):
        gateway = LlmGateway(
            mode="stub", routes={"label_classifier": {"model_id": "local-7b", "temperature": 0.5}}
        )
        route = gateway.route_for(Role.LABEL_CLASSIFIER)
        assert route.model_id == "local-7b"
        assert route.temperature == 0.5
        assert route.max_output_tokens == 128  # unspecified fields keep defaults

    def test_defaults_match_routing_table(self):
        gateway = LlmGateway(mode="stub")
        for role, (model_id, temperature, max_tokens) in DEFAULT_ROUTES.items():
            route = gateway.route_for(role)
            assert (route.model_id, route.temperature, route.max_output_tokens) == (
                model_id,
                temperature,
                max_tokens,
            )


class TestStubMode:
    def test_fifo_per_role(self, stub_gateway):
        stub_gateway.script(Role.LABEL_CLASSIFIER, "bug", "question")
        stub_gateway.script(Role.QUALITY_JUDGE, "judge-reply")
        assert stub_gateway.complete(Role.LABEL_CLASSIFIER, []) == "bug"
        assert stub_gateway.complete(Role.QUALITY_JUDGE, []) == "judge-reply"
        assert stub_gateway.complete(Role.LABEL_CLASSIFIER, []) == "question"
        assert stub_gateway.network_calls == 0

    def test_exhaustion_is_an_error(self, stub_gateway):
        with pytest.raises(StubExhausted):
            stub_gateway.complete(Role.LABEL_CLASSIFIER, [])

    def test_scripted_exception_raises(self, stub_gateway):
        stub_gateway.script(Role.COMMENT_ANALYST, GatewayFailure("boom"))
        with pytest.raises(GatewayFailure):
            stub_gateway.complete(Role.COMMENT_ANALYST, [])

    def test_calls_counted_by_role(self, stub_gateway):
        stub_gateway.script(Role.LABEL_CLASSIFIER, "bug")
        stub_gateway.complete(Role.LABEL_CLASSIFIER, [])
        assert stub_gateway.calls_by_role == {"label_classifier": 1}


class TestDigest:
    def test_stable_across_calls(self):
        route = ModelRoute(Role.LABEL_CLASSIFIER, "m", 0.0, 128)
        messages = [{"role": "user", "content": "hello"}]
        assert request_digest(route, messages) == request_digest(route, messages)

    def test_known_value_is_platform_stable(self):
        route = ModelRoute(Role.LABEL_CLASSIFIER, "m", 0.0, 128)
        digest = request_digest(route, [{"role": "user", "content": "hello"}])
        # sha256 of the canonical JSON, pinned so canonicalization changes are loud
        assert digest == "c96e2e49727ba9aa45af001ebe49fa730477f6463a27815cd0e066f89ee6601e"

    def test_different_messages_differ(self):
        route = ModelRoute(Role.LABEL_CLASSIFIER, "m", 0.0, 128)
        a = request_digest(route, [{"role": "user", "content": "a"}])
        b = request_digest(route, [{"role": "user", "content": "b"}])
        assert a != b

    def test_route_parameters_enter_digest(self):
        messages = [{"role": "user", "content": "x"}]
        a = request_digest(ModelRoute(Role.LABEL_CLASSIFIER, "m", 0.0, 128), messages)
        b = request_digest(ModelRoute(Role.LABEL_CLASSIFIER, "m", 0.2, 128), messages)
        assert a != b


class TestRecordReplay:
    def _recording_gateway(self, tmp_path, transport):
        return LlmGateway(
            mode="record",
            record_path=str(tmp_path / "exchanges.jsonl"),
            transport=transport,
            retry_base_delay=0.0,
        )

    def test_record_then_replay_round_trip(self, tmp_path):
        transport_calls = []

        def transport(route, messages):
            transport_calls.append(route.role.value)
            return f"answer-{len(transport_calls)}"

        recorder = self._recording_gateway(tmp_path, transport)
        messages_a = [{"role": "user", "content": "alpha"}]
        messages_b = [{"role": "user", "content": "beta"}]
        first = recorder.complete(Role.LABEL_CLASSIFIER, messages_a)
        second = recorder.complete(Role.COMMENT_ANALYST, messages_b)

        replayer = LlmGateway(mode="replay", replay_path=str(tmp_path / "exchanges.jsonl"))
        assert replayer.complete(Role.LABEL_CLASSIFIER, messages_a) == first
        assert replayer.complete(Role.COMMENT_ANALYST, messages_b) == second
        assert replayer.network_calls == 0
        assert len(transport_calls) == 2  # replay never re-invoked the transport

    def test_replay_miss_on_novel_digest(self, tmp_path):
        recorder = self._recording_gateway(tmp_path, lambda r, m: "x")
        recorder.complete(Role.LABEL_CLASSIFIER, [{"role": "user", "content": "known"}])
        replayer = LlmGateway(mode="replay", replay_path=str(tmp_path / "exchanges.jsonl"))
        with pytest.raises(ReplayMiss):
            replayer.complete(Role.LABEL_CLASSIFIER, [{"role": "user", "content": "novel"}])

    def test_replay_requires_existing_file(self, tmp_path):
        with pytest.raises(ValueError):
            LlmGateway(mode="replay", replay_path=str(tmp_path / "missing.jsonl"))


class TestRetries:
    def test_transient_failures_retried(self):
        attempts = []

        def flaky(route, messages):
            attempts.append(1)
            if len(attempts) < 3:
                raise ConnectionError("transient")
            return "ok"

        gateway = LlmGateway(mode="live", transport=flaky, retry_base_delay=0.0)
        assert gateway.complete(Role.LABEL_CLASSIFIER, []) == "ok"
        assert len(attempts) == 3

    def test_budget_is_three_attempts(self):
        attempts = []

        def always_down(route, messages):
            attempts.append(1)
            raise ConnectionError("down")

        gateway = LlmGateway(mode="live", transport=always_down, retry_base_delay=0.0)
        with pytest.raises(GatewayFailure):
            gateway.complete(Role.LABEL_CLASSIFIER, [])
        assert len(attempts) == 3


class TestVision:
    def test_stubbed_vision_description(self, stub_gateway):
        stub_gateway.script(Role.VISION_DESCRIBER, "error dialog showing NullPointerException")
        text = stub_gateway.complete_vision(Role.VISION_DESCRIBER, b"\x89PNG...", "describe")
        assert text == "error dialog showing NullPointerException"

    def test_two_images_same_prompt_different_digests(self, tmp_path):
        digests = []

        def transport(route, messages):
            digests.append(request_digest(route, messages))
            return "desc"

        gateway = LlmGateway(
            mode="record",
            record_path=str(tmp_path / "v.jsonl"),
            transport=transport,
            retry_base_delay=0.0,
        )
        gateway.complete_vision(Role.VISION_DESCRIBER, b"image-one", "p")
        gateway.complete_vision(Role.VISION_DESCRIBER, b"image-two", "p")
        assert digests[0] != digests[1]

    def test_text_role_rejects_images(self, stub_gateway):
        with pytest.raises(UnsupportedPayload):
            stub_gateway.complete_vision(Role.LABEL_CLASSIFIER, b"png", "p")
