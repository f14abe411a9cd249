"""OpenAI-compatible chat-completions client.

This is the only module that knows the wire format.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import httpx

log = logging.getLogger(__name__)


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    """The endpoint could not be reached or kept failing after all retries."""


class ProtocolError(GatewayError):
    """The endpoint answered, but not with a chat-completion body."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "llama-3-70B-instruct"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 8

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"


_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class ChatClient:
    """Thread-safe client; at most ``cfg.max_in_flight`` requests run at once."""

    def __init__(
        self,
        cfg: EndpointConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(cfg.max_in_flight)
        headers = {}
        token = os.environ.get(cfg.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(timeout=cfg.timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> ChatClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def payload(self, prompt: str) -> dict:
        return {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }

    def complete(self, prompt: str) -> str:
        payload = self.payload(prompt)
        attempts = self.cfg.retries + 1
        last = ""
        for attempt in range(attempts):
            if attempt:
                delay = self.cfg.backoff * 2 ** (attempt - 1)
                log.info("retrying chat completion in %.2fs (%s)", delay, last)
                self._sleep(delay)
            try:
                with self._gate:
                    resp = self._http.post(self.cfg.url, json=payload)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in _RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _extract_text(resp)
        raise TransportError(f"gave up after {attempts} attempts: {last}")


def _extract_text(resp: httpx.Response) -> str:
    try:
        body = resp.json()
        content = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed chat-completion body: {resp.text[:200]!r}") from exc
    if not isinstance(content, str):
        raise ProtocolError("message content is not text")
    return content


def chat_complete(cfg: EndpointConfig, prompt: str, transport: Optional[httpx.BaseTransport] = None) -> str:
    with ChatClient(cfg, transport=transport) as client:
        return client.complete(prompt)
