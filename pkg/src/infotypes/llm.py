"""Completion-style LLM access: HTTP endpoint client, replay client, yes/no parsing."""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from .errors import ConfigError, FixtureIncomplete, ProtocolError, RetriableFailure

log = logging.getLogger(__name__)

YES, NO, INVALID = "yes", "no", "invalid"


@dataclass(frozen=True)
class ModelConfig:
    endpoint_url: str = ""
    model_id: str = "flan-t5-xxl"
    temperature: float = 0.3
    max_tokens: int = 8
    request_timeout: float = 60.0
    max_parallel: int = 4
    max_retries: int = 3
    response_field: str = "text"
    api_key: str | None = None
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be positive")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.3
    max_tokens: int = 8
    repetition: int = 0

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("empty prompt")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    latency: float = 0.0


class CompletionClient(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _extract(payload, path: str):
    node = payload
    for part in path.split("."):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ProtocolError(f"response has no element {part!r} in path {path!r}") from None
        elif isinstance(node, dict):
            if part not in node:
                raise ProtocolError(f"response has no field {part!r} in path {path!r}")
            node = node[part]
        else:
            raise ProtocolError(f"cannot descend into {type(node).__name__} at {part!r}")
    if not isinstance(node, str):
        raise ProtocolError(f"field {path!r} is not a string")
    return node


class HttpCompletionClient:
    """POSTs {prompt, temperature, max_tokens[, model]} and reads a text field back.

    At most ``max_parallel`` requests are in flight at once, across all
    threads sharing the client.
    """

    def __init__(
        self,
        config: ModelConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not config.endpoint_url:
            raise ConfigError("no endpoint_url configured")
        self.config = config
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(config.max_parallel)
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._http = httpx.Client(
            transport=transport, timeout=config.request_timeout, headers=headers
        )

    def close(self) -> None:
        self._http.close()

    def _post_once(self, body: dict) -> str:
        resp = self._http.post(self.config.endpoint_url, json=body)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise httpx.HTTPStatusError(
                f"server returned {resp.status_code}", request=resp.request, response=resp
            )
        if resp.status_code >= 400:
            raise ProtocolError(f"endpoint rejected request with HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except (json.JSONDecodeError, ValueError):
            raise ProtocolError("endpoint returned malformed JSON") from None
        return _extract(payload, self.config.response_field)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        body = {
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "model": self.config.model_id,
        }
        attempts = self.config.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            with self._slots:
                t0 = time.perf_counter()
                try:
                    text = self._post_once(body)
                    return CompletionResponse(text, time.perf_counter() - t0)
                except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                    last = exc
            if attempt + 1 < attempts:
                delay = self.config.backoff_base * 2**attempt
                log.debug("request failed (%s); retry %d in %.2fs", last, attempt + 1, delay)
                self._sleep(delay)
        raise RetriableFailure(f"gave up after {attempts} attempts: {last}")


class ReplayClient:
    """Returns logged responses keyed by (prompt sha256, repetition)."""

    def __init__(self, log_entries: Mapping[tuple[str, int], str]):
        self._log = dict(log_entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayClient":
        entries: dict[tuple[str, int], str] = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = (rec["prompt_sha256"], int(rec["repetition"]))
                    entries[key] = rec["response"]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    raise ProtocolError(f"{path}:{lineno}: bad replay record") from None
        return cls(entries)

    def __len__(self) -> int:
        return len(self._log)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = (prompt_sha256(request.prompt), request.repetition)
        try:
            return CompletionResponse(self._log[key], 0.0)
        except KeyError:
            raise FixtureIncomplete(
                f"replay log has no response for prompt {key[0][:12]}... repetition {key[1]}"
            ) from None


def complete(client: CompletionClient, request: CompletionRequest) -> CompletionResponse:
    return client.complete(request)


def make_client(config: ModelConfig, replay: str | Path | None = None) -> CompletionClient:
    if replay:
        return ReplayClient.from_file(replay)
    if not config.endpoint_url:
        raise ConfigError("neither an endpoint URL nor a replay log was given")
    return HttpCompletionClient(config)


_LEAD = re.compile(r"^[\s\W_]+")
_FIRST_WORD = re.compile(r"[^\W_]+")


def parse_yes_no(text: str) -> str:
    """Classify a raw model answer as 'yes', 'no' or 'invalid' by its first word."""
    stripped = _LEAD.sub("", text.lower())
    m = _FIRST_WORD.match(stripped)
    if not m:
        return INVALID
    word = m.group(0)
    if word == "yes":
        return YES
    if word == "no":
        return NO
    return INVALID
