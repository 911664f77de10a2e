"""Chat-completion boundary: replay cassettes, scripted mocks, HTTP.

Requests are keyed by a stable 64-bit hash of (model, temperature, messages)
in canonical JSON, hex-encoded so cassettes stay human-diffable. The whole
engine test suite runs on replay and scripted backends only; the HTTP
backend speaks the de-facto chat-completions wire format and is used to
record cassettes in the first place.

Temperature defaults to 0 everywhere: deterministic decoding is part of the
contract, not a tuning choice.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import SceneSmithError
from .jsonutil import canonical_bytes, compact_dumps
from .rng import fnv1a64

TRANSCRIPT_SCHEMA = "transcript/1"

_ROLES = ("system", "user", "assistant")


class TransportError(SceneSmithError):
    code = "transport_error"


class UnmatchedTranscript(SceneSmithError):
    code = "unmatched_transcript"


class RateLimited(SceneSmithError):
    code = "rate_limited"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise ValueError("chat message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # replay | scripted-mock | http
    model: str = "default"
    temperature: float = 0.0
    endpoint: str | None = None
    api_key_env: str | None = None
    cassette_path: str | None = None
    record: bool = False
    timeout: float = 60.0

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        return cls(
            kind=d["kind"],
            model=d.get("model", "default"),
            temperature=float(d.get("temperature", 0.0)),
            endpoint=d.get("endpoint"),
            api_key_env=d.get("api_key_env"),
            cassette_path=d.get("cassette_path"),
            record=bool(d.get("record", False)),
            timeout=float(d.get("timeout", 60.0)),
        )


def request_hash(model: str, temperature: float, messages: Iterable[ChatMessage]) -> str:
    payload = {
        "model": model,
        "temperature": temperature,
        "messages": [m.to_dict() for m in messages],
    }
    return format(fnv1a64(compact_dumps(payload).encode("utf-8")), "016x")


class Transcript:
    """Ordered (request hash, response) cassette stored as JSON."""

    def __init__(self, entries: list[dict] | None = None):
        self.entries: list[dict] = entries or []
        self._by_hash = {e["hash"]: e for e in self.entries}
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        path = Path(path)
        if path.is_dir():
            merged = cls()
            for file in sorted(path.rglob("*.json")):
                for entry in cls.load(file).entries:
                    merged.append(entry["hash"], entry.get("request", {}), entry["response"])
            return merged
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("schema") != TRANSCRIPT_SCHEMA:
            raise UnmatchedTranscript(f"unsupported transcript schema {data.get('schema')!r}")
        return cls(entries=list(data.get("entries", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(canonical_bytes({"schema": TRANSCRIPT_SCHEMA, "entries": self.entries}))

    def lookup(self, req_hash: str) -> str:
        entry = self._by_hash.get(req_hash)
        if entry is None:
            raise UnmatchedTranscript(f"no recorded response for request hash {req_hash}")
        return entry["response"]

    def append(self, req_hash: str, request: dict, response: str) -> None:
        with self._lock:
            entry = {"hash": req_hash, "request": request, "response": response}
            self.entries.append(entry)
            self._by_hash[req_hash] = entry


class ReplayBackend:
    def __init__(self, transcript: Transcript, model: str = "default", temperature: float = 0.0):
        self.transcript = transcript
        self.model = model
        self.temperature = temperature

    def complete(self, messages: list[ChatMessage]) -> str:
        return self.transcript.lookup(request_hash(self.model, self.temperature, messages))


class ScriptedBackend:
    """FIFO queue of canned responses, for mock-driven pipeline tests."""

    def __init__(self, responses: Iterable[str] = (), model: str = "scripted", temperature: float = 0.0):
        self.queue: list[str] = list(responses)
        self.model = model
        self.temperature = temperature
        self.requests: list[list[ChatMessage]] = []

    def push(self, *responses: str) -> None:
        self.queue.extend(responses)

    def complete(self, messages: list[ChatMessage]) -> str:
        self.requests.append(list(messages))
        if not self.queue:
            raise TransportError("scripted backend ran out of responses")
        return self.queue.pop(0)


class HttpBackend:
    """Standard chat-completions JSON over HTTP with bounded 429 retries."""

    MAX_RETRIES = 3

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise ValueError("http backend needs an endpoint")
        self.config = config
        self.model = config.model
        self.temperature = config.temperature

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: list[ChatMessage]) -> str:
        import requests

        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [m.to_dict() for m in messages],
        }
        delay = 1.0
        for attempt in range(self.MAX_RETRIES + 1):
            try:
                resp = requests.post(
                    self.config.endpoint, json=body, headers=self._headers(), timeout=self.config.timeout
                )
            except requests.RequestException as e:
                raise TransportError(str(e)) from e
            if resp.status_code == 429:
                if attempt == self.MAX_RETRIES:
                    raise RateLimited("rate limited after retries")
                time.sleep(delay)
                delay *= 2.0
                continue
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:500]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as e:
                raise TransportError(f"malformed completion response: {e}") from e
        raise TransportError("unreachable")


class RecordingBackend:
    """Wraps another backend, persisting every exchange into a cassette."""

    def __init__(self, inner, transcript: Transcript, cassette_path: str | Path):
        self.inner = inner
        self.transcript = transcript
        self.cassette_path = Path(cassette_path)
        self.model = inner.model
        self.temperature = inner.temperature

    def complete(self, messages: list[ChatMessage]) -> str:
        response = self.inner.complete(messages)
        req_hash = request_hash(self.model, self.temperature, messages)
        self.transcript.append(
            req_hash,
            {"model": self.model, "temperature": self.temperature, "messages": [m.to_dict() for m in messages]},
            response,
        )
        self.transcript.save(self.cassette_path)
        return response


def make_backend(config: BackendConfig):
    if config.kind == "replay":
        if not config.cassette_path:
            raise ValueError("replay backend needs a cassette_path")
        return ReplayBackend(Transcript.load(config.cassette_path), config.model, config.temperature)
    if config.kind == "scripted-mock":
        return ScriptedBackend(model=config.model, temperature=config.temperature)
    if config.kind == "http":
        backend = HttpBackend(config)
        if config.record:
            if not config.cassette_path:
                raise ValueError("recording needs a cassette_path")
            path = Path(config.cassette_path)
            transcript = Transcript.load(path) if path.exists() else Transcript()
            return RecordingBackend(backend, transcript, path)
        return backend
    raise ValueError(f"unknown backend kind {config.kind!r}")


def complete(config: BackendConfig, messages: list[ChatMessage]) -> str:
    return make_backend(config).complete(messages)
