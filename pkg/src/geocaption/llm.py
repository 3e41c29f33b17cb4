"""Text-completion clients: a scripted mock and an HTTP chat-completions client."""
from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable, Optional, Protocol, Sequence, Union, runtime_checkable

import httpx

log = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """The endpoint could not be reached or returned an unusable reply."""


@runtime_checkable
class LlmClient(Protocol):
    def complete(self, prompt: str, temperature: float) -> str: ...


Responder = Callable[[str, float], str]


class MockClient:
    """Deterministic client for tests.

    `script` is either a list of responses returned in order, or a callable
    ``(prompt, temperature) -> response``. Every call is recorded in `calls`.
    A response that is an exception instance is raised instead of returned.
    """

    def __init__(self, script: Union[Sequence[Union[str, BaseException]], Responder], cycle: bool = False):
        self._fn = script if callable(script) else None
        self._items = None if callable(script) else list(script)
        self.cycle = cycle
        self.calls: list[tuple[str, float]] = []
        self._lock = threading.Lock()

    @property
    def temperatures(self) -> list[float]:
        return [t for _, t in self.calls]

    def complete(self, prompt: str, temperature: float) -> str:
        if not 0.0 <= temperature <= 2.0:
            raise ValueError(f"temperature {temperature} outside [0, 2]")
        with self._lock:
            i = len(self.calls)
            self.calls.append((prompt, temperature))
            if self._fn is None:
                if not self._items:
                    raise TransportError("mock script is empty")
                if i >= len(self._items) and not self.cycle:
                    raise TransportError(f"mock script exhausted after {len(self._items)} calls")
                out = self._items[i % len(self._items)]
            else:
                out = None
        if out is None:
            out = self._fn(prompt, temperature)
        if isinstance(out, BaseException):
            raise out
        return out


class HttpClient:
    """POSTs OpenAI-style chat-completion requests.

    Transport errors, 429 and 5xx replies are retried with exponential
    backoff; `max_in_flight` caps concurrent requests across threads.
    """

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None, *,
                 timeout: float = 60.0, max_retries: int = 3, backoff: float = 1.0,
                 max_in_flight: int = 8, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        if not endpoint:
            raise ValueError("endpoint URL is required")
        self.endpoint = endpoint
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, **kw) -> "HttpClient":
        try:
            endpoint = os.environ["ENDPOINT_URL"]
        except KeyError:
            raise ValueError("ENDPOINT_URL is not set") from None
        return cls(endpoint, os.environ.get("MODEL_NAME", "default"), os.environ.get("API_KEY"), **kw)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _payload(self, prompt: str, temperature: float) -> dict:
        return {"model": self.model, "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}]}

    def complete(self, prompt: str, temperature: float) -> str:
        body = self._payload(prompt, temperature)
        last: Optional[str] = None
        with self._slots:
            for attempt in range(self.max_retries + 1):
                if attempt:
                    self._sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    resp = self._http.post(self.endpoint, json=body)
                except httpx.HTTPError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                    log.warning("request failed (attempt %d): %s", attempt + 1, last)
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                    log.warning("retryable reply (attempt %d): %s", attempt + 1, last)
                    continue
                if resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise TransportError(f"malformed completion reply: {exc}") from exc
        raise TransportError(f"gave up after {self.max_retries + 1} attempts: {last}")
