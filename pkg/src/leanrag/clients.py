"""Provider clients with record/replay cassettes for deterministic offline runs.

A cassette is a JSON map from request content hash to the recorded response,
plus a manifest of which model produced each entry. Chat cassettes store
response text; embedding cassettes store vectors as JSON arrays.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .domain import CLIENT_MODES, compound_hash

CASSETTE_FORMAT_VERSION = 1
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 0.5


class ProviderError(Exception):
    """Transport or provider failure that survived the retry budget."""


class ReplayMiss(Exception):
    """A replay-mode lookup found no cassette entry for the request hash."""

    def __init__(self, key: str):
        super().__init__(f"no cassette entry for request hash {key}")
        self.key = key


class TransportError(Exception):
    """Retryable transport failure; retry_after comes from the provider."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


def chat_request_hash(model: str, system: str, user: str) -> str:
    return compound_hash(model, system, user)


def embedding_key(provider_id: str, model_id: str, text: str) -> str:
    return compound_hash(provider_id, model_id, text)


class Cassette:
    """On-disk request-hash → response map with atomic, serialized writes."""

    def __init__(self, path: str | Path, entries: dict | None = None, manifest: dict | None = None):
        self.path = Path(path)
        self.entries: dict[str, object] = dict(entries or {})
        self.manifest: dict[str, str] = dict(manifest or {})
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: str | Path, create: bool = False) -> "Cassette":
        path = Path(path)
        if not path.exists():
            if not create:
                raise FileNotFoundError(f"cassette file not found: {path}")
            return cls(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
        return cls(path, entries=obj.get("entries", {}), manifest=obj.get("manifest", {}))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def get(self, key: str):
        return self.entries.get(key)

    def lookup(self, key: str):
        """Return the recorded value for key, or raise ReplayMiss."""
        if key not in self.entries:
            raise ReplayMiss(key)
        return self.entries[key]

    def record(self, key: str, value, model_id: str) -> None:
        """Store one entry and flush; identical re-records are no-ops."""
        with self._lock:
            if self.entries.get(key) == value and self.manifest.get(key) == model_id:
                return
            self.entries[key] = value
            self.manifest[key] = model_id
            self._flush_locked()

    def _flush_locked(self) -> None:
        payload = {
            "format": CASSETTE_FORMAT_VERSION,
            "entries": self.entries,
            "manifest": self.manifest,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=self.path.name, dir=self.path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
                fh.write("\n")
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _call_with_retries(
    fn: Callable[[], object],
    max_attempts: int,
    backoff: float,
    sleep: Callable[[float], None],
):
    last: TransportError | None = None
    for attempt in range(max_attempts):
        try:
            return fn()
        except TransportError as exc:
            last = exc
            if attempt + 1 >= max_attempts:
                break
            delay = exc.retry_after if exc.retry_after is not None else backoff * (2**attempt)
            sleep(delay)
    raise ProviderError(f"provider call failed after {max_attempts} attempts: {last}") from last


def _validate_mode(mode: str, cassette: Cassette | None) -> None:
    if mode not in CLIENT_MODES:
        raise ValueError(f"unknown client mode {mode!r}")
    if mode in ("record", "replay") and cassette is None:
        raise ValueError(f"{mode} mode requires a cassette")


@dataclass
class ChatClient:
    """Chat-completion client; transport is (model, system, user) -> text."""

    mode: str
    cassette: Cassette | None = None
    transport: Callable[[str, str, str], str] | None = None
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff: float = DEFAULT_BACKOFF_SECONDS
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self) -> None:
        _validate_mode(self.mode, self.cassette)

    def complete(self, system: str, user: str, model: str) -> str:
        key = chat_request_hash(model, system, user)
        if self.mode in ("record", "replay") and self.cassette is not None and key in self.cassette:
            value = self.cassette.get(key)
            if not isinstance(value, str):
                raise ProviderError(f"cassette entry {key} is not a chat response")
            return value
        if self.mode == "replay":
            raise ReplayMiss(key)
        if self.transport is None:
            raise ProviderError("no live transport configured")
        text = _call_with_retries(
            lambda: self.transport(model, system, user),
            self.max_attempts,
            self.backoff,
            self.sleep,
        )
        if not isinstance(text, str):
            raise ProviderError("chat transport returned a non-string response")
        if self.mode == "record" and self.cassette is not None:
            self.cassette.record(key, text, model)
        return text


def chat(client: ChatClient, system: str, user: str, model: str) -> str:
    """Send one system/user exchange to the model and return its text reply."""
    return client.complete(system, user, model)


@dataclass
class EmbeddingClient:
    """Embedding client; transport is (model, texts) -> list of vectors."""

    mode: str
    cassette: Cassette | None = None
    transport: Callable[[str, list[str]], list[list[float]]] | None = None
    provider_id: str = "remote"
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff: float = DEFAULT_BACKOFF_SECONDS
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self) -> None:
        _validate_mode(self.mode, self.cassette)

    def embed_texts(self, texts: list[str], model: str) -> list[list[float]]:
        """Embed texts in order; replay misses raise, record mode persists."""
        keys = [embedding_key(self.provider_id, model, text) for text in texts]
        vectors: list[list[float] | None] = [None] * len(texts)
        missing: list[int] = []
        for i, key in enumerate(keys):
            if self.mode in ("record", "replay") and self.cassette is not None and key in self.cassette:
                value = self.cassette.get(key)
                if not isinstance(value, list):
                    raise ProviderError(f"cassette entry {key} is not an embedding")
                vectors[i] = [float(v) for v in value]
            else:
                missing.append(i)
        if missing:
            if self.mode == "replay":
                raise ReplayMiss(keys[missing[0]])
            if self.transport is None:
                raise ProviderError("no live embedding transport configured")
            batch = [texts[i] for i in missing]
            fetched = _call_with_retries(
                lambda: self.transport(model, batch),
                self.max_attempts,
                self.backoff,
                self.sleep,
            )
            if not isinstance(fetched, list) or len(fetched) != len(batch):
                raise ProviderError("embedding transport returned a malformed batch")
            for i, vec in zip(missing, fetched):
                vec = [float(v) for v in vec]
                vectors[i] = vec
                if self.mode == "record" and self.cassette is not None:
                    self.cassette.record(keys[i], vec, model)
        return [v for v in vectors if v is not None]


def openai_chat_transport(
    endpoint: str,
    api_key_env: str,
    timeout: float = 60.0,
) -> Callable[[str, str, str], str]:
    """OpenAI-style chat-completions transport. Temperature pinned to 0."""

    def transport(model: str, system: str, user: str) -> str:
        import requests

        api_key = os.environ.get(api_key_env)
        if not api_key:
            raise ProviderError(f"environment variable {api_key_env} is not set")
        body = {
            "model": model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0,
        }
        try:
            resp = requests.post(
                endpoint,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(
                f"HTTP {resp.status_code}", retry_after=_retry_after(resp.headers)
            )
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed chat response: {exc}") from exc

    return transport


def openai_embedding_transport(
    endpoint: str,
    api_key_env: str,
    timeout: float = 60.0,
) -> Callable[[str, list[str]], list[list[float]]]:
    """OpenAI-style embeddings transport."""

    def transport(model: str, texts: list[str]) -> list[list[float]]:
        import requests

        api_key = os.environ.get(api_key_env)
        if not api_key:
            raise ProviderError(f"environment variable {api_key_env} is not set")
        try:
            resp = requests.post(
                endpoint,
                json={"model": model, "input": texts},
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(
                f"HTTP {resp.status_code}", retry_after=_retry_after(resp.headers)
            )
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()["data"]
            return [item["embedding"] for item in data]
        except (KeyError, ValueError, TypeError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc

    return transport


def _retry_after(headers) -> float | None:
    value = headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None
