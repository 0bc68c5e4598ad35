"""Provider-agnostic chat-completion gateway.

Supports two HTTP dialects (OpenAI-compatible and Anthropic-style) plus a
fully deterministic scripted provider for tests and dry runs. Every attempt
is recorded in a usage ledger; transient failures retry with exponential
backoff; rate limiting is a client-side token bucket.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field

import requests

from .errors import AuthError, MalformedResponse, TransportError

SYSTEM = "system"
USER_ROLE = "user"
ASSISTANT = "assistant"


def estimate_tokens(text: str) -> int:
    """Crude deterministic token estimate: ceil(characters / 4)."""
    return (len(text) + 3) // 4


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024
    tag: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be nonempty")
        for m in self.messages:
            if not m.content:
                raise ValueError("message contents must be nonempty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    input_tokens: int
    output_tokens: int
    latency_ms: float
    provider: str
    tokens_estimated: bool = False


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_ms: float = 250.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # openai-compatible-http | anthropic-style-http | scripted
    endpoint: str = ""
    auth_env: str = ""  # name of the env var holding the secret, never inline
    model_name: str = ""
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    rate_limit_per_min: float = 6000.0
    script: tuple = ()  # scripted kind: reply strings / ScriptedFailure items
    script_profile: str = ""  # scripted kind: named built-in behavior

    def __post_init__(self):
        if self.rate_limit_per_min <= 0:
            raise ValueError("rate_limit_per_min must be > 0")


@dataclass
class LedgerEntry:
    tag: str
    input_tokens: int
    output_tokens: int
    latency_ms: float
    attempts: int
    ok: bool


class UsageLedger:
    """Thread-safe record of every completed call."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries: list[LedgerEntry] = []

    def record(self, entry: LedgerEntry):
        with self._lock:
            self.entries.append(entry)

    def totals(self) -> tuple[int, int]:
        with self._lock:
            ok = [e for e in self.entries if e.ok]
            return sum(e.input_tokens for e in ok), sum(e.output_tokens for e in ok)

    def export_jsonl(self) -> str:
        with self._lock:
            return "".join(
                json.dumps(
                    {
                        "tag": e.tag,
                        "input_tokens": e.input_tokens,
                        "output_tokens": e.output_tokens,
                        "latency_ms": e.latency_ms,
                        "attempts": e.attempts,
                    }
                )
                + "\n"
                for e in self.entries
            )


class _TokenBucket:
    def __init__(self, per_minute: float, clock=time.monotonic, sleep=time.sleep):
        self.rate = per_minute / 60.0
        self.capacity = max(1.0, per_minute / 60.0)
        self.tokens = self.capacity
        self.updated = clock()
        self.clock = clock
        self.sleep = sleep
        self.lock = threading.Lock()

    def acquire(self):
        with self.lock:
            now = self.clock()
            self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
            self.updated = now
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return
            wait = (1.0 - self.tokens) / self.rate
            self.tokens = 0.0
        self.sleep(wait)


class ScriptedFailure:
    """Script item that simulates a transient provider failure."""

    def __init__(self, status: int = 503):
        self.status = status


class _Transient(Exception):
    pass


class ScriptedProvider:
    """Deterministic provider: replies come from a fixed script or callable.

    A script is a sequence of strings / ScriptedFailure items consumed FIFO
    (cycled if `cycle`), or a callable ``fn(request, call_index) -> str``.
    Latency is a fixed synthetic 1.0 ms so downstream wall clocks stay
    deterministic and positive.
    """

    name = "scripted"

    def __init__(self, script=None, cycle: bool = False):
        self._script = script
        self._cycle = cycle
        self._calls = 0
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            idx = self._calls
            self._calls += 1
            self.requests.append(request)
        if callable(self._script):
            reply = self._script(request, idx)
        else:
            script = self._script or ()
            if not script:
                raise MalformedResponse("scripted provider has no script")
            pos = idx % len(script) if self._cycle else idx
            if pos >= len(script):
                raise MalformedResponse("scripted provider exhausted its script")
            reply = script[pos]
        if isinstance(reply, ScriptedFailure):
            raise _Transient(f"scripted failure status {reply.status}")
        prompt_chars = sum(len(m.content) for m in request.messages)
        return ChatResponse(
            content=reply,
            input_tokens=(prompt_chars + 3) // 4,
            output_tokens=estimate_tokens(reply),
            latency_ms=1.0,
            provider=self.name,
            tokens_estimated=True,
        )


class _HttpProvider:
    def __init__(self, config: ProviderConfig, post=requests.post):
        self.config = config
        self.post = post

    def _secret(self) -> str:
        if not self.config.auth_env:
            return ""
        value = os.environ.get(self.config.auth_env)
        if value is None:
            raise AuthError(f"environment variable {self.config.auth_env!r} not set")
        return value

    def send(self, request: ChatRequest) -> ChatResponse:
        t0 = time.monotonic()
        try:
            resp = self.post(
                self.config.endpoint,
                headers=self._headers(),
                json=self._body(request),
                timeout=120,
            )
        except requests.Timeout as exc:
            raise _Transient(str(exc)) from exc
        except requests.RequestException as exc:
            raise _Transient(str(exc)) from exc
        latency_ms = (time.monotonic() - t0) * 1000.0
        if resp.status_code in (401, 403):
            raise AuthError(f"provider returned {resp.status_code}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"provider returned {resp.status_code}")
        try:
            body = resp.json()
            content, usage = self._parse(body)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(str(exc), raw_body=resp.text) from exc
        in_tok, out_tok = usage
        estimated = in_tok is None or out_tok is None
        if in_tok is None:
            in_tok = sum(estimate_tokens(m.content) for m in request.messages)
        if out_tok is None:
            out_tok = estimate_tokens(content)
        return ChatResponse(
            content=content,
            input_tokens=in_tok,
            output_tokens=out_tok,
            latency_ms=latency_ms,
            provider=self.name,
            tokens_estimated=estimated,
        )


class OpenAICompatProvider(_HttpProvider):
    name = "openai-compatible-http"

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        secret = self._secret()
        if secret:
            headers["Authorization"] = f"Bearer {secret}"
        return headers

    def _body(self, request: ChatRequest):
        return {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def _parse(self, body):
        content = body["choices"][0]["message"]["content"]
        usage = body.get("usage") or {}
        return content, (usage.get("prompt_tokens"), usage.get("completion_tokens"))


class AnthropicStyleProvider(_HttpProvider):
    name = "anthropic-style-http"

    def _headers(self):
        headers = {"Content-Type": "application/json", "anthropic-version": "2023-06-01"}
        secret = self._secret()
        if secret:
            headers["x-api-key"] = secret
        return headers

    def _body(self, request: ChatRequest):
        system = ""
        messages = []
        for m in request.messages:
            if m.role == SYSTEM and not messages:
                system = m.content
            else:
                messages.append({"role": m.role, "content": m.content})
        body = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if system:
            body["system"] = system
        return body

    def _parse(self, body):
        content = body["content"][0]["text"]
        usage = body.get("usage") or {}
        return content, (usage.get("input_tokens"), usage.get("output_tokens"))


def _build_provider(config: ProviderConfig, post=requests.post):
    if config.kind == "scripted":
        if config.script_profile:
            from .scripts_builtin import builtin_script

            return ScriptedProvider(builtin_script(config.script_profile))
        return ScriptedProvider(list(config.script))
    if config.kind == "openai-compatible-http":
        return OpenAICompatProvider(config, post=post)
    if config.kind == "anthropic-style-http":
        return AnthropicStyleProvider(config, post=post)
    raise ValueError(f"unknown provider kind {config.kind!r}")


class Gateway:
    """Retry + rate limit + accounting around one provider."""

    def __init__(self, config: ProviderConfig, provider=None, post=requests.post,
                 sleep=time.sleep, ledger: UsageLedger | None = None):
        self.config = config
        self.provider = provider if provider is not None else _build_provider(config, post=post)
        self.ledger = ledger if ledger is not None else UsageLedger()
        deterministic = config.kind == "scripted"
        self._sleep = (lambda _s: None) if deterministic else sleep
        self._bucket = _TokenBucket(config.rate_limit_per_min, sleep=self._sleep)

    def complete(self, request: ChatRequest) -> ChatResponse:
        last_error = None
        for attempt in range(1, self.config.retry.max_attempts + 1):
            self._bucket.acquire()
            try:
                response = self.provider.send(request)
            except _Transient as exc:
                last_error = exc
                self.ledger.record(LedgerEntry(request.tag, 0, 0, 0.0, attempt, ok=False))
                if attempt < self.config.retry.max_attempts:
                    backoff = self.config.retry.base_backoff_ms * math.pow(2, attempt - 1)
                    self._sleep(backoff / 1000.0)
                continue
            self.ledger.record(
                LedgerEntry(
                    request.tag,
                    response.input_tokens,
                    response.output_tokens,
                    response.latency_ms,
                    attempt,
                    ok=True,
                )
            )
            return response
        raise TransportError(
            f"exhausted {self.config.retry.max_attempts} attempts: {last_error}"
        )

    def attempts_for_tag(self, tag: str) -> int:
        return sum(1 for e in self.ledger.entries if e.tag == tag)


def complete(config: ProviderConfig, request: ChatRequest) -> ChatResponse:
    """One-shot convenience wrapper; batch callers should hold a Gateway."""
    return Gateway(config).complete(request)


def provider_config_from_dict(doc: dict) -> ProviderConfig:
    retry = doc.get("retry") or {}
    return ProviderConfig(
        kind=doc["kind"],
        endpoint=doc.get("endpoint", ""),
        auth_env=doc.get("auth_env", ""),
        model_name=doc.get("model_name", ""),
        retry=RetryPolicy(
            max_attempts=retry.get("max_attempts", 3),
            base_backoff_ms=retry.get("base_backoff_ms", 250.0),
        ),
        rate_limit_per_min=doc.get("rate_limit_per_min", 6000.0),
        script=tuple(doc.get("script", ())),
        script_profile=doc.get("script_profile", ""),
    )
