"""Provider-agnostic LLM completion gateway with per-role model routing.

Four modes:

* ``live``   — POST to an OpenAI-compatible chat endpoint with retries.
* ``record`` — live, plus every exchange is appended to a JSON-lines file.
* ``replay`` — answer from a recorded exchange file, zero network activity.
* ``stub``   — per-role FIFO queues of scripted responses for tests.

Every call names its role; the route table fixes model id, temperature and
output budget per role. Deterministic classifier roles run at temperature
0.0 with tight token caps; generative roles run at 0.2 with a 4096-token
window. All defaults are configuration-overridable.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import requests

from .errors import (
    GatewayFailure,
    ReplayMiss,
    StubExhausted,
    UnknownRole,
    UnsupportedPayload,
)


class Role(str, Enum):
    LABEL_CLASSIFIER = "label_classifier"
    FIELD_BUCKET_CLASSIFIER = "field_bucket_classifier"
    COMMENT_ANALYST = "comment_analyst"
    LINK_SUMMARIZER = "link_summarizer"
    VISION_DESCRIBER = "vision_describer"
    TRAJECTORY_SYNTHESIZER = "trajectory_synthesizer"
    QUALITY_JUDGE = "quality_judge"


@dataclass(frozen=True)
class ModelRoute:
    role: Role
    model_id: str
    temperature: float
    max_output_tokens: int


# (model_id, temperature, max_output_tokens) per role. Model ids are opaque
# configuration defaults; swap them freely without touching code.
DEFAULT_ROUTES: dict[Role, tuple[str, float, int]] = {
    Role.LABEL_CLASSIFIER: ("gpt-4o-mini", 0.0, 128),
    Role.FIELD_BUCKET_CLASSIFIER: ("gpt-4o-mini", 0.0, 256),
    Role.COMMENT_ANALYST: ("gpt-5.4-mini", 0.2, 4096),
    Role.LINK_SUMMARIZER: ("gpt-5.4-mini", 0.2, 4096),
    Role.VISION_DESCRIBER: ("gpt-5.4-mini", 0.2, 4096),
    Role.TRAJECTORY_SYNTHESIZER: ("gpt-4o-mini", 0.2, 4096),
    Role.QUALITY_JUDGE: ("gpt-5.4", 0.0, 4096),
}

VISION_ROLES = frozenset({Role.VISION_DESCRIBER})

GATEWAY_MODES = ("live", "record", "replay", "stub")

MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class Exchange:
    """One request/response pair, as persisted in record mode."""

    role: str
    request_digest: str
    request: tuple
    response: str
    latency_s: float


def coerce_role(role: Role | str) -> Role:
    try:
        return Role(role)
    except ValueError:
        raise UnknownRole(f"unknown role {role!r}") from None


def request_digest(route: ModelRoute, messages: list[dict]) -> str:
    """Content hash of the request: canonical JSON of messages + route params.

    Stable across runs and platforms; identical (messages, route) always
    yield the identical digest.
    """
    payload = {
        "model": route.model_id,
        "temperature": route.temperature,
        "max_output_tokens": route.max_output_tokens,
        "messages": messages,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def http_transport(
    route: ModelRoute,
    messages: list[dict],
    api_key: str | None = None,
    base_url: str = "https://api.openai.com/v1",
    timeout: float = 120.0,
) -> str:
    """Default live transport: OpenAI-compatible chat completion."""
    key = api_key or os.environ.get("OPENAI_API_KEY", "")
    payload = {
        "model": route.model_id,
        "temperature": route.temperature,
        "max_tokens": route.max_output_tokens,
        "messages": [_to_provider_message(m) for m in messages],
    }
    resp = requests.post(
        f"{base_url.rstrip('/')}/chat/completions",
        headers={"Authorization": f"Bearer {key}", "Content-Type": "application/json"},
        json=payload,
        timeout=timeout,
    )
    if resp.status_code >= 400:
        raise GatewayFailure(f"provider HTTP {resp.status_code}: {resp.text[:200]}")
    data = resp.json()
    return (((data.get("choices") or [{}])[0].get("message") or {}).get("content") or "").strip()


def _to_provider_message(message: dict) -> dict:
    if "image_b64" not in message:
        return {"role": message["role"], "content": message["content"]}
    return {
        "role": message["role"],
        "content": [
            {"type": "text", "text": message["content"]},
            {
                "type": "image_url",
                "image_url": {"url": "data:image/png;base64," + message["image_b64"]},
            },
        ],
    }


class LlmGateway:
    """Shared, thread-safe handle for all pipeline LLM calls.

    ``transport`` is a callable ``(route, messages) -> text``; tests inject
    counting or failing transports. Retries are bounded at MAX_ATTEMPTS per
    call with exponential backoff; exhaustion raises GatewayFailure.
    """

    def __init__(
        self,
        mode: str = "stub",
        routes: dict | None = None,
        transport: Callable[[ModelRoute, list[dict]], str] | None = None,
        record_path: str | None = None,
        replay_path: str | None = None,
        api_key: str | None = None,
        base_url: str = "https://api.openai.com/v1",
        retry_base_delay: float = 1.0,
    ):
        if mode not in GATEWAY_MODES:
            raise ValueError(f"mode must be one of {GATEWAY_MODES}, got {mode!r}")
        self.mode = mode
        self.retry_base_delay = retry_base_delay
        self._routes = self._build_routes(routes or {})
        self._transport = transport or (
            lambda route, messages: http_transport(route, messages, api_key=api_key, base_url=base_url)
        )
        self._record_path = record_path
        self._stub_queues: dict[Role, deque] = defaultdict(deque)
        self._replayed: dict[str, str] = {}
        self._lock = threading.Lock()
        self.calls_by_role: Counter = Counter()
        self.network_calls = 0
        if mode == "record" and not record_path:
            raise ValueError("record mode requires record_path")
        if mode == "replay":
            if not replay_path or not os.path.exists(replay_path):
                raise ValueError("replay mode requires an existing exchange file")
            self._replayed = _load_exchanges(replay_path)

    @staticmethod
    def _build_routes(overrides: dict) -> dict[Role, ModelRoute]:
        routes = {}
        for role, (model_id, temperature, max_tokens) in DEFAULT_ROUTES.items():
            routes[role] = ModelRoute(role, model_id, temperature, max_tokens)
        for name, spec in overrides.items():
            role = coerce_role(name)
            base = routes[role]
            routes[role] = ModelRoute(
                role=role,
                model_id=spec.get("model_id", base.model_id),
                temperature=float(spec.get("temperature", base.temperature)),
                max_output_tokens=int(spec.get("max_output_tokens", base.max_output_tokens)),
            )
        return routes

    def route_for(self, role: Role | str) -> ModelRoute:
        """Resolve the model route configured for a role."""
        return self._routes[coerce_role(role)]

    # -- stub scripting -------------------------------------------------

    def script(self, role: Role | str, *responses: str | Exception) -> None:
        """Queue scripted responses (or exceptions to raise) for a role."""
        self._stub_queues[coerce_role(role)].extend(responses)

    def pending(self, role: Role | str) -> int:
        """Number of scripted responses not yet consumed for a role."""
        return len(self._stub_queues[coerce_role(role)])

    # -- completion ------------------------------------------------------

    def complete(self, role: Role | str, messages: list[dict]) -> str:
        """Send a completion request under the role's route and return text."""
        role = coerce_role(role)
        route = self._routes[role]
        with self._lock:
            self.calls_by_role[role.value] += 1
        if self.mode == "stub":
            return self._stub_response(role)
        digest = request_digest(route, messages)
        if self.mode == "replay":
            try:
                return self._replayed[digest]
            except KeyError:
                raise ReplayMiss(f"no recorded exchange for digest {digest[:12]}…") from None
        started = time.monotonic()
        response = self._call_with_retries(route, messages)
        if self.mode == "record":
            self._append_exchange(
                Exchange(
                    role=role.value,
                    request_digest=digest,
                    request=tuple(json.dumps(m, sort_keys=True) for m in messages),
                    response=response,
                    latency_s=time.monotonic() - started,
                )
            )
        return response

    def complete_vision(self, role: Role | str, image_bytes: bytes, prompt: str) -> str:
        """As complete(), with an image payload attached to the prompt."""
        role = coerce_role(role)
        if role not in VISION_ROLES:
            raise UnsupportedPayload(f"role {role.value} does not accept images")
        message = {
            "role": "user",
            "content": prompt,
            "image_b64": base64.b64encode(image_bytes).decode("ascii"),
        }
        return self.complete(role, [message])

    # -- internals -------------------------------------------------------

    def _stub_response(self, role: Role) -> str:
        with self._lock:
            queue = self._stub_queues[role]
            if not queue:
                raise StubExhausted(f"no scripted response left for {role.value}")
            item = queue.popleft()
        if isinstance(item, Exception):
            raise item
        return item

    def _call_with_retries(self, route: ModelRoute, messages: list[dict]) -> str:
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            try:
                with self._lock:
                    self.network_calls += 1
                return self._transport(route, messages)
            except Exception as exc:  # noqa: BLE001 - transport faults become GatewayFailure
                last_error = exc
                if attempt < MAX_ATTEMPTS - 1:
                    time.sleep(self.retry_base_delay * (2**attempt))
        raise GatewayFailure(f"{route.role.value}: retries exhausted: {last_error}")

    def _append_exchange(self, exchange: Exchange) -> None:
        line = json.dumps(
            {
                "role": exchange.role,
                "request_digest": exchange.request_digest,
                "request": list(exchange.request),
                "response": exchange.response,
                "latency_s": round(exchange.latency_s, 6),
            },
            ensure_ascii=False,
        )
        with self._lock:
            with open(self._record_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def _load_exchanges(path: str) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            mapping[record["request_digest"]] = record["response"]
    return mapping
