"""Minimal JSON-over-HTTP chat-completions client.

Speaks the de-facto chat shape (POST a messages array plus generation
parameters, read back a choices list), so hosted APIs, local servers, and
test stubs all fit behind one config. Transient failures (timeouts,
connection errors, HTTP 429/5xx) retry with exponential backoff; anything
else is surfaced immediately. An optional on-disk cache keyed by
(model, request hash) makes reruns reproducible without the endpoint.

The API key is read from the environment variable named in the config and
is never logged; debug logging shows the request/response JSON only.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

from .errors import DataError, ProtocolError, TransportError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass
class ClientConfig:
    base_url: str
    model_id: str
    api_key_env: str = "KGREASON_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    temperature: float = 0.0
    max_tokens: int = 512
    candidate_count: int = 1
    backoff_base: float = 0.5
    cache_dir: str | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise DataError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise DataError(f"timeout must be > 0, got {self.timeout}")
        if self.max_in_flight < 1:
            raise DataError(f"max_in_flight must be >= 1, got {self.max_in_flight}")


class ChatClient:
    """Thread-safe handle over one endpoint; at most max_in_flight requests run at once."""

    def __init__(self, config: ClientConfig):
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self._session = requests.Session()

    def chat(self, messages: Sequence[tuple[str, str]],
             n: int | None = None) -> list[tuple[str, float | None]]:
        """Send messages, return candidate (text, score) pairs in endpoint order.

        Scores are passed through when the endpoint reports them per choice
        (a "logprob" or "score" field); None otherwise.
        """
        if not messages:
            raise DataError("chat needs at least one message")
        payload = {
            "model": self.config.model_id,
            "messages": [{"role": role, "content": content} for role, content in messages],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "n": n if n is not None else self.config.candidate_count,
        }

        cached = self._cache_read(payload)
        if cached is not None:
            return cached

        with self._semaphore:
            body = self._post_with_retries(payload)
        candidates = self._parse_reply(body)
        self._cache_write(payload, candidates)
        return candidates

    # -- transport ----------------------------------------------------------

    def _url(self) -> str:
        base = self.config.base_url.rstrip("/")
        if base.endswith("/chat/completions"):
            return base
        return base + "/chat/completions"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_with_retries(self, payload: dict) -> str:
        attempts: list[str] = []
        logger.debug("chat request: %s", json.dumps(payload, ensure_ascii=False))
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self._url(), json=payload,
                    headers=self._headers(), timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                attempts.append(f"attempt {attempt + 1}: {type(exc).__name__}")
                continue
            if response.status_code == 200:
                logger.debug("chat response: %s", response.text)
                return response.text
            if response.status_code in RETRYABLE_STATUS:
                attempts.append(f"attempt {attempt + 1}: HTTP {response.status_code}")
                continue
            raise ProtocolError(
                f"endpoint returned HTTP {response.status_code}", body=response.text
            )
        raise TransportError("chat request failed after retries", attempts)

    @staticmethod
    def _parse_reply(body: str) -> list[tuple[str, float | None]]:
        try:
            data = json.loads(body)
        except json.JSONDecodeError:
            raise ProtocolError("endpoint reply is not JSON", body=body) from None
        choices = data.get("choices") if isinstance(data, dict) else None
        if not isinstance(choices, list) or not choices:
            raise ProtocolError("endpoint reply has no choices", body=body)
        out: list[tuple[str, float | None]] = []
        for choice in choices:
            if not isinstance(choice, dict):
                raise ProtocolError("malformed choice in endpoint reply", body=body)
            message = choice.get("message")
            if isinstance(message, dict) and isinstance(message.get("content"), str):
                text = message["content"]
            elif isinstance(choice.get("text"), str):
                text = choice["text"]
            else:
                raise ProtocolError("choice carries no text content", body=body)
            score = choice.get("logprob", choice.get("score"))
            out.append((text, float(score) if score is not None else None))
        return out

    # -- cache ---------------------------------------------------------------

    def _cache_path(self, payload: dict) -> Path | None:
        if not self.config.cache_dir:
            return None
        digest = hashlib.sha256(
            json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()
        return Path(self.config.cache_dir) / f"{self.config.model_id}-{digest}.json"

    def _cache_read(self, payload: dict) -> list[tuple[str, float | None]] | None:
        path = self._cache_path(payload)
        if path is None or not path.exists():
            return None
        try:
            stored = json.loads(path.read_text(encoding="utf-8"))
            return [(text, score) for text, score in stored]
        except (json.JSONDecodeError, ValueError, TypeError):
            logger.warning("ignoring corrupt cache entry %s", path)
            return None

    def _cache_write(self, payload: dict,
                     candidates: list[tuple[str, float | None]]) -> None:
        path = self._cache_path(payload)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps([[text, score] for text, score in candidates], ensure_ascii=False),
            encoding="utf-8",
        )
