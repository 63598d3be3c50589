"""Chat-completion backends.

Three interchangeable services behind one ``complete(request)`` shape: a
scripted backend that replays registered texts keyed by the exact prompt (the
offline test double), an HTTP client for any OpenAI-compatible server, and a
disk cache that wraps either. All of them are safe to share across threads.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Protocol, Sequence

import requests

from .core import ChatMessage, Exactness, Role, TokenUsage

_log = logging.getLogger(__name__)

__all__ = [
    "FinishReason",
    "BackendRequest",
    "BackendResponse",
    "BackendError",
    "AuthenticationError",
    "RetriesExhaustedError",
    "UnknownScriptError",
    "Backend",
    "request_key",
    "script_key",
    "ScriptedBackend",
    "RateLimiter",
    "HttpBackend",
    "CachedBackend",
]


class FinishReason(enum.Enum):
    STOP = "stop"
    LENGTH = "length"
    OTHER = "other"


@dataclass(frozen=True)
class BackendRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: Fraction = Fraction(0)
    max_tokens: int = 2048
    n: int = 1
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class BackendResponse:
    completions: tuple[str, ...]
    usage: TokenUsage
    finish_reasons: tuple[FinishReason, ...]

    def __post_init__(self) -> None:
        if not self.completions:
            raise ValueError("a response carries at least one completion")
        if len(self.completions) != len(self.finish_reasons):
            raise ValueError("one finish reason per completion")


class BackendError(RuntimeError):
    """Base for everything a backend can fail with."""


class AuthenticationError(BackendError):
    """Missing or rejected credentials."""


class RetriesExhaustedError(BackendError):
    """Transient failures outlasted the retry budget."""


class UnknownScriptError(BackendError):
    """The scripted backend has no response registered for this prompt."""


class Backend(Protocol):
    def complete(self, request: BackendRequest) -> BackendResponse: ...


def _message_payload(messages: Sequence[ChatMessage]) -> list[dict[str, str]]:
    return [{"role": m.role.value, "content": m.content} for m in messages]


def _digest(payload: Any) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def request_key(request: BackendRequest) -> str:
    """Content address of a request: every field that could change the
    response participates, so equal keys mean interchangeable calls."""
    return _digest(
        {
            "model": request.model,
            "messages": _message_payload(request.messages),
            "temperature": str(request.temperature),
            "max_tokens": request.max_tokens,
            "n": request.n,
            "seed": request.seed,
        }
    )


def script_key(messages: Sequence[ChatMessage]) -> str:
    """Scripted responses are keyed by the rendered prompt alone."""
    return _digest(_message_payload(messages))


def _estimate_tokens(text: str) -> int:
    # Four characters per token: crude, but deterministic and size-ordered.
    return max(1, len(text) // 4)


@dataclass(frozen=True)
class _Script:
    completions: tuple[str, ...]
    finish: FinishReason
    usage: Optional[TokenUsage]


class ScriptedBackend:
    """Replays registered completions; the offline stand-in for a model.

    Responses are keyed by the exact message list, so the same prompt gives
    the same bytes in any process. A single registered text satisfies any
    request ``n`` by repetition; a registered list must match ``n``.
    """

    def __init__(self) -> None:
        self._scripts: dict[str, _Script] = {}

    def register(
        self,
        messages: Sequence[ChatMessage],
        completion: str | Sequence[str],
        *,
        finish: FinishReason = FinishReason.STOP,
        usage: Optional[TokenUsage] = None,
    ) -> None:
        texts = (completion,) if isinstance(completion, str) else tuple(completion)
        if not texts:
            raise ValueError("register needs at least one completion")
        self._scripts[script_key(messages)] = _Script(texts, finish, usage)

    def complete(self, request: BackendRequest) -> BackendResponse:
        script = self._scripts.get(script_key(request.messages))
        if script is None:
            raise UnknownScriptError(
                f"no scripted response for this prompt "
                f"(key {script_key(request.messages)[:12]}, {len(request.messages)} messages)"
            )
        if len(script.completions) == 1:
            completions = script.completions * request.n
        elif len(script.completions) == request.n:
            completions = script.completions
        else:
            raise BackendError(
                f"script holds {len(script.completions)} completions, request wants n={request.n}"
            )
        usage = script.usage
        if usage is None:
            prompt = sum(_estimate_tokens(m.content) for m in request.messages)
            completion = sum(_estimate_tokens(text) for text in completions)
            usage = TokenUsage(prompt, completion, Exactness.REPORTED)
        return BackendResponse(
            completions=completions,
            usage=usage,
            finish_reasons=(script.finish,) * len(completions),
        )


class RateLimiter:
    """Spaces calls at least ``60 / requests_per_minute`` seconds apart."""

    def __init__(self, requests_per_minute: int, sleep: Callable[[float], None] = time.sleep):
        if requests_per_minute < 1:
            raise ValueError("requests_per_minute must be >= 1")
        self._interval = 60.0 / requests_per_minute
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
        if slot > now:
            self._sleep(slot - now)


_TRANSIENT_STATUSES = {408, 409, 429, 500, 502, 503, 504}


class HttpBackend:
    """OpenAI-compatible chat-completions client.

    The API key is read from the environment at call time; transient
    failures back off exponentially for up to ``max_attempts`` tries.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str = "OPENAI_API_KEY",
        *,
        rate_limiter: Optional[RateLimiter] = None,
        max_attempts: int = 5,
        timeout: float = 120.0,
        backoff_base: float = 1.0,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._api_key_env = api_key_env
        self._limiter = rate_limiter
        self._max_attempts = max_attempts
        self._timeout = timeout
        self._backoff_base = backoff_base
        self._session = session or requests.Session()
        self._sleep = sleep

    def complete(self, request: BackendRequest) -> BackendResponse:
        api_key = os.environ.get(self._api_key_env)
        if not api_key:
            raise AuthenticationError(f"environment variable {self._api_key_env} is not set")
        payload: dict[str, Any] = {
            "model": request.model,
            "messages": _message_payload(request.messages),
            "temperature": float(request.temperature),
            "max_tokens": request.max_tokens,
            "n": request.n,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        headers = {"Authorization": f"Bearer {api_key}"}

        last_failure = "no attempt made"
        for attempt in range(1, self._max_attempts + 1):
            if attempt > 1:
                self._sleep(self._backoff_base * 2 ** (attempt - 2))
            if self._limiter is not None:
                self._limiter.acquire()
            try:
                reply = self._session.post(
                    self._url, json=payload, headers=headers, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last_failure = f"connection failure: {exc}"
                _log.warning("attempt %d/%d %s", attempt, self._max_attempts, last_failure)
                continue
            if reply.status_code in (401, 403):
                raise AuthenticationError(f"server rejected credentials ({reply.status_code})")
            if reply.status_code in _TRANSIENT_STATUSES:
                last_failure = f"HTTP {reply.status_code}"
                _log.warning("attempt %d/%d %s", attempt, self._max_attempts, last_failure)
                continue
            if reply.status_code != 200:
                raise BackendError(f"HTTP {reply.status_code}: {reply.text[:200]}")
            return self._parse(reply, request)
        raise RetriesExhaustedError(
            f"{self._max_attempts} attempts failed; last: {last_failure}"
        )

    def _parse(self, reply: requests.Response, request: BackendRequest) -> BackendResponse:
        try:
            body = reply.json()
            choices = body["choices"]
            completions = tuple(choice["message"]["content"] for choice in choices)
            finishes = tuple(
                _FINISH_BY_WIRE.get(choice.get("finish_reason"), FinishReason.OTHER)
                for choice in choices
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc!r}") from exc
        if len(completions) != request.n:
            raise BackendError(f"asked for n={request.n}, server sent {len(completions)} choices")
        usage = body.get("usage") or {}
        try:
            token_usage = TokenUsage(
                int(usage["prompt_tokens"]),
                int(usage["completion_tokens"]),
                Exactness.REPORTED,
            )
        except (KeyError, TypeError, ValueError):
            token_usage = TokenUsage(
                sum(_estimate_tokens(m.content) for m in request.messages),
                sum(_estimate_tokens(text) for text in completions),
                Exactness.APPROXIMATE,
            )
        return BackendResponse(completions, token_usage, finishes)


_FINISH_BY_WIRE = {
    "stop": FinishReason.STOP,
    "length": FinishReason.LENGTH,
}


def _response_to_json(response: BackendResponse) -> dict[str, Any]:
    return {
        "completions": list(response.completions),
        "finish_reasons": [reason.value for reason in response.finish_reasons],
        "usage": {
            "prompt_tokens": response.usage.prompt_tokens,
            "completion_tokens": response.usage.completion_tokens,
            "exactness": response.usage.exactness.value,
        },
    }


def _response_from_json(body: Any) -> BackendResponse:
    completions = tuple(body["completions"])
    if not all(isinstance(text, str) for text in completions):
        raise ValueError("completions must be strings")
    return BackendResponse(
        completions=completions,
        usage=TokenUsage(
            int(body["usage"]["prompt_tokens"]),
            int(body["usage"]["completion_tokens"]),
            Exactness(body["usage"]["exactness"]),
        ),
        finish_reasons=tuple(FinishReason(reason) for reason in body["finish_reasons"]),
    )


class CachedBackend:
    """Content-addressed disk cache in front of any backend.

    A hit returns the stored response, bytes and usage included, so metrics
    measure the method's cost rather than the wall's; ``live_calls`` counts
    what actually went out. Unreadable entries are recomputed and rewritten.
    """

    def __init__(self, inner: Backend, cache_dir: Path | str) -> None:
        self._inner = inner
        self._dir = Path(cache_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.hits = 0
        self.live_calls = 0

    def complete(self, request: BackendRequest) -> BackendResponse:
        path = self._dir / f"{request_key(request)}.json"
        if path.exists():
            try:
                response = _response_from_json(json.loads(path.read_text(encoding="utf-8")))
            except (OSError, ValueError, KeyError, TypeError) as exc:
                _log.warning("discarding unreadable cache entry %s (%r)", path.name, exc)
            else:
                with self._lock:
                    self.hits += 1
                return response
        response = self._inner.complete(request)
        with self._lock:
            self.live_calls += 1
        # Unique temp name per writer, then an atomic rename: a concurrent
        # writer of the same key loses nothing, the entries are identical.
        tmp = path.with_name(f"{path.stem}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(_response_to_json(response), indent=2), encoding="utf-8")
        os.replace(tmp, path)
        return response
