"""Gateway to generative-model backends.

One uniform surface for every policy that needs text generation: a prompt
template registry, a deterministic mock backend for tests and offline use,
and an HTTP backend speaking the text-generation-inference ``/generate``
JSON protocol. Responses always come back whole (no streaming) so they can
be safety-checked before anything reaches the user.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

DEFAULT_MAX_NEW_TOKENS = 256
DEFAULT_TIMEOUT_MS = 5000
DEFAULT_MAX_CONCURRENCY = 8

TEMPLATE_DIR = Path(__file__).parent / "templates"


class GatewayError(Exception):
    """Base for everything the gateway can raise; policies catch this."""


class PromptError(GatewayError):
    """Unknown template or missing slot."""


class TransportError(GatewayError):
    """Could not reach the backend at all."""


class BadStatusError(GatewayError):
    """Backend answered with a non-2xx status."""

    def __init__(self, status_code: int, body: str):
        self.status_code = status_code
        super().__init__(f"backend returned {status_code}: {body[:200]}")


class MalformedResponseError(GatewayError):
    """Backend answered 2xx but the body is not the expected schema."""


class GatewayTimeout(GatewayError):
    """Request or concurrency-queue wait exceeded timeout_ms."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_slots: frozenset[str]


@dataclass(frozen=True)
class GenRequest:
    template_id: str
    slots: dict
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    temperature: float = 0.0
    timeout_ms: int | None = None  # None: use the gateway default


@dataclass(frozen=True)
class GenResponse:
    text: str
    backend_id: str
    latency_ms: int
    truncated: bool = False


_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


def load_templates(directory: Path | str = TEMPLATE_DIR) -> dict[str, PromptTemplate]:
    """Read every *.txt in the directory; filename stem is the template id."""
    registry: dict[str, PromptTemplate] = {}
    for path in sorted(Path(directory).glob("*.txt")):
        body = path.read_text(encoding="utf-8")
        slots = frozenset(_PLACEHOLDER_RE.findall(body))
        registry[path.stem] = PromptTemplate(id=path.stem, body=body, required_slots=slots)
    return registry


def render_prompt(template: PromptTemplate, slots: dict) -> str:
    """Substitute every placeholder in a single pass.

    Single-pass on purpose: slot values containing ``{x}`` are inserted
    literally and never re-expanded.
    """

    def _sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in slots:
            raise PromptError(f"missing slot {name!r} for template {template.id!r}")
        return str(slots[name])

    return _PLACEHOLDER_RE.sub(_sub, template.body)


def slot_digest(slots: dict) -> str:
    canonical = json.dumps(slots, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


ANY_SLOTS = "*"


class MockBackend:
    """Deterministic stand-in for a model server.

    Canned replies are keyed by (template_id, slot digest); ``ANY_SLOTS``
    matches any slots for that template. Anything un-canned is answered with
    a fixed echo of the most salient slot, so transcripts replay identically.
    """

    backend_id = "mock"
    _ECHO_SLOTS = ("question", "utterance", "requirement", "step")

    def __init__(self, canned: dict[tuple[str, str], str] | None = None):
        self.canned = dict(canned or {})
        self.calls: list[GenRequest] = []

    def add_canned(self, template_id: str, text: str, slots: dict | None = None) -> None:
        key = slot_digest(slots) if slots is not None else ANY_SLOTS
        self.canned[(template_id, key)] = text

    def generate(
        self, prompt: str, request: GenRequest, timeout_ms: int = DEFAULT_TIMEOUT_MS
    ) -> tuple[str, bool]:
        self.calls.append(request)
        exact = self.canned.get((request.template_id, slot_digest(request.slots)))
        if exact is not None:
            return exact, False
        wildcard = self.canned.get((request.template_id, ANY_SLOTS))
        if wildcard is not None:
            return wildcard, False
        for name in self._ECHO_SLOTS:
            if name in request.slots:
                return f"(mock {request.template_id}) {request.slots[name]}", False
        return f"(mock {request.template_id})", False


# Substitutions the mock proposes out of the box, so offline conversations
# exercise the adaptation path end to end.
_MOCK_SUBSTITUTES = {
    "butter": "margarine",
    "milk": "oat milk",
    "eggs": "applesauce",
    "sugar": "honey",
    "wood glue": "epoxy",
}


def default_mock() -> MockBackend:
    mock = MockBackend()
    for missing, stand_in in _MOCK_SUBSTITUTES.items():
        mock.add_canned("substitute", stand_in, slots={"requirement": missing})
    return mock


class HttpBackend:
    """Client for a text-generation-inference compatible ``/generate`` route."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self.backend_id = f"http:{self.base_url}"

    def generate(
        self, prompt: str, request: GenRequest, timeout_ms: int = DEFAULT_TIMEOUT_MS
    ) -> tuple[str, bool]:
        payload = {
            "inputs": prompt,
            "parameters": {
                "max_new_tokens": request.max_new_tokens,
                "temperature": request.temperature,
            },
        }
        try:
            response = httpx.post(
                f"{self.base_url}/generate",
                json=payload,
                timeout=timeout_ms / 1000.0,
            )
        except httpx.TimeoutException as e:
            raise GatewayTimeout(f"no response within {timeout_ms} ms") from e
        except httpx.HTTPError as e:
            raise TransportError(str(e)) from e
        if not 200 <= response.status_code < 300:
            raise BadStatusError(response.status_code, response.text)
        try:
            body = response.json()
        except ValueError as e:
            raise MalformedResponseError("response body is not JSON") from e
        if not isinstance(body, dict) or not isinstance(body.get("generated_text"), str):
            raise MalformedResponseError('response JSON lacks "generated_text"')
        details = body.get("details")
        truncated = isinstance(details, dict) and details.get("finish_reason") == "length"
        return body["generated_text"], truncated


@dataclass
class Gateway:
    """Shared handle policies call; safe for concurrent use across sessions."""

    backend: MockBackend | HttpBackend
    templates: dict[str, PromptTemplate] = field(default_factory=load_templates)
    max_concurrency: int = DEFAULT_MAX_CONCURRENCY
    default_timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self) -> None:
        self._slots = threading.BoundedSemaphore(self.max_concurrency)

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    def generate(self, request: GenRequest) -> GenResponse:
        template = self.templates.get(request.template_id)
        if template is None:
            raise PromptError(f"unknown template {request.template_id!r}")
        prompt = render_prompt(template, request.slots)
        timeout_ms = request.timeout_ms or self.default_timeout_ms
        if not self._slots.acquire(timeout=timeout_ms / 1000.0):
            raise GatewayTimeout(
                f"queue wait exceeded {timeout_ms} ms "
                f"({self.max_concurrency} requests in flight)"
            )
        started = time.perf_counter()
        try:
            text, truncated = self.backend.generate(prompt, request, timeout_ms)
        finally:
            self._slots.release()
        latency_ms = int((time.perf_counter() - started) * 1000)
        return GenResponse(
            text=text,
            backend_id=self.backend.backend_id,
            latency_ms=latency_ms,
            truncated=truncated,
        )
