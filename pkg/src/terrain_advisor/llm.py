"""Chat-completion backends.

``RemoteBackend`` talks to any ``/chat/completions``-compatible endpoint.
``ScriptedBackend`` replays canned responses keyed by the SHA-256 of the
prompt.  The offline shortcut oracle lives in ``advisor.OracleBackend``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

logger = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
WILDCARD = "*"


class BackendError(RuntimeError):
    """The remote service failed after all retries."""


class FixtureError(KeyError):
    """A scripted backend has no response for the prompt."""


@dataclass(frozen=True)
class ChatRequest:
    user: str
    model: str = "gpt-4o"
    system: str | None = None
    temperature: float = 0.0
    max_output: int | None = None
    # passed to in-process backends only, never serialised onto the wire
    context: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.user:
            raise ValueError("user message must be non-empty")

    def messages(self) -> list[dict]:
        msgs = []
        if self.system is not None:
            msgs.append({"role": "system", "content": self.system})
        msgs.append({"role": "user", "content": self.user})
        return msgs


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency: float
    backend: str


class ChatBackend(Protocol):
    name: str

    def complete(self, req: ChatRequest) -> ChatResponse: ...


def prompt_digest(req: ChatRequest | str) -> str:
    """Hex SHA-256 of the prompt text (system and user joined by a blank line)."""
    if isinstance(req, str):
        text = req
    else:
        text = req.user if req.system is None else f"{req.system}\n\n{req.user}"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class ScriptedBackend:
    name = "scripted"

    def __init__(self, responses: dict[str, str] | None = None, default: str | None = None):
        self.responses = dict(responses or {})
        self.default = default

    @classmethod
    def from_fixture(cls, path: str | Path) -> "ScriptedBackend":
        """Load a JSON list of ``{"prompt_sha256": hex, "response": str}``; ``"*"`` sets the fallback."""
        entries = json.loads(Path(path).read_text())
        responses, default = {}, None
        for e in entries:
            if e["prompt_sha256"] == WILDCARD:
                default = e["response"]
            else:
                responses[e["prompt_sha256"].lower()] = e["response"]
        return cls(responses, default)

    def register(self, prompt: str, response: str) -> None:
        self.responses[prompt_digest(prompt)] = response

    def complete(self, req: ChatRequest) -> ChatResponse:
        t0 = time.perf_counter()
        key = prompt_digest(req)
        if key in self.responses:
            text = self.responses[key]
        elif self.default is not None:
            text = self.default
        else:
            raise FixtureError(f"no scripted response for prompt {key}")
        return ChatResponse(text, time.perf_counter() - t0, self.name)


_TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class RemoteBackend:
    """Thread-safe client with bounded in-flight requests and exponential backoff."""

    name = "remote"

    def __init__(self, base_url: str, api_key: str | None = None, model: str | None = None,
                 max_concurrency: int = 4, timeout: float = 60.0, max_retries: int = 3,
                 backoff: float = 1.0, transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_concurrency)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def payload(self, req: ChatRequest) -> dict:
        body = {
            "model": self.model or req.model,
            "messages": req.messages(),
            "temperature": req.temperature,
        }
        if req.max_output is not None:
            body["max_tokens"] = req.max_output
        return body

    def complete(self, req: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        body = self.payload(req)
        delay = self.backoff
        last: Exception | None = None
        with self._slots:
            t0 = time.perf_counter()
            for attempt in range(self.max_retries + 1):
                try:
                    r = self._client.post(url, json=body)
                    if r.status_code in _TRANSIENT_STATUS:
                        raise httpx.HTTPStatusError(f"transient status {r.status_code}", request=r.request, response=r)
                    r.raise_for_status()
                    text = r.json()["choices"][0]["message"]["content"]
                    return ChatResponse(text, time.perf_counter() - t0, self.name)
                except httpx.HTTPStatusError as e:
                    if e.response.status_code not in _TRANSIENT_STATUS:
                        raise BackendError(f"{url} returned {e.response.status_code}: {e.response.text[:200]}") from e
                    last = e
                except (httpx.TransportError, httpx.TimeoutException) as e:
                    last = e
                except (KeyError, IndexError, ValueError) as e:
                    raise BackendError(f"malformed completion from {url}: {e}") from e
                if attempt < self.max_retries:
                    logger.warning("request to %s failed (%s); retrying in %.1fs", url, last, delay)
                    time.sleep(delay)
                    delay *= 2
        raise BackendError(f"{url} failed after {self.max_retries} retries: {last}") from last
