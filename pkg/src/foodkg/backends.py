"""Chat-completion and embedding backends.

The HTTP clients speak the wire format of common local LLM servers: chat
requests POST ``{model, messages, options}`` to ``/api/chat`` and read the
assistant message text back; embedding requests POST ``{model, input}`` to
``/api/embed`` and read a list of vectors. Generation options always carry
the deterministic contract (zero temperature, fixed seed, top_p=0, top_k=1,
4096-token window, thinking off) unless a config override says otherwise.

Offline work uses the mock backends: a chat transcript file maps a hash of
(system prompt, user prompt) to a canned response, and the mock embedder
derives vectors from a text hash. Mock vectors are non-semantic; their only
guarantees are determinism, unit norm, and a zero first component, which
leaves axis 0 free for tests that need a vector orthogonal to everything
the mock can produce.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np


class BackendError(Exception):
    pass


class BackendUnreachable(BackendError):
    pass


class MockTranscriptMiss(BackendError):
    """The mock transcript has no entry for this prompt."""


@dataclass(frozen=True)
class GenerationConfig:
    """Fixed decoding settings for reproducible generation."""

    temperature: float = 0.0
    seed: int = 42
    context_window: int = 4096
    top_p: float = 0.0
    top_k: int = 1
    thinking: bool = False
    max_retries: int = 2

    def with_overrides(self, overrides: dict | None) -> "GenerationConfig":
        if not overrides:
            return self
        return replace(self, **overrides)


class ChatBackend(Protocol):
    model: str

    def complete(self, system: str, user: str, config: GenerationConfig) -> str: ...


class EmbeddingBackend(Protocol):
    model: str

    def embed(self, texts: list[str]) -> list[list[float]]: ...


def prompt_key(system: str, user: str) -> str:
    """Stable transcript key for one (system, user) prompt pair."""
    payload = json.dumps([system, user], ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


class HttpChatBackend:
    """Chat client for an HTTP completion server."""

    def __init__(self, endpoint: str, model: str, timeout: float = 120.0) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self._client = httpx.Client(timeout=timeout)

    def complete(self, system: str, user: str, config: GenerationConfig) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "options": {
                "temperature": config.temperature,
                "seed": config.seed,
                "top_p": config.top_p,
                "top_k": config.top_k,
                "num_ctx": config.context_window,
            },
            "think": config.thinking,
            "stream": False,
        }
        try:
            response = self._client.post(f"{self.endpoint}/api/chat", json=body)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnreachable(f"chat backend at {self.endpoint}: {exc}") from exc
        data = response.json()
        try:
            return data["message"]["content"]
        except (KeyError, TypeError) as exc:
            raise BackendError(f"chat response missing message content: {data!r}") from exc


class MockChatBackend:
    """Replays canned responses from a transcript of prompt-hash -> text.

    Deterministic by construction: the same (system, user) pair always maps
    to the same response. Unknown prompts raise so tests never silently pass
    on fabricated output.
    """

    model = "mock-chat"

    def __init__(self, transcript: dict[str, str]) -> None:
        self.transcript = dict(transcript)
        self.calls: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockChatBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise BackendError("chat transcript must be a JSON object")
        return cls(data)

    def complete(self, system: str, user: str, config: GenerationConfig) -> str:
        key = prompt_key(system, user)
        with self._lock:
            self.calls.append(key)
        try:
            return self.transcript[key]
        except KeyError:
            raise MockTranscriptMiss(
                f"no transcript entry for prompt hash {key[:12]}… "
                f"(user prompt starts: {user[:80]!r})"
            ) from None


def save_transcript(transcript: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(transcript, ensure_ascii=False, sort_keys=True, indent=1),
        encoding="utf-8",
    )


class HttpEmbeddingBackend:
    """Embedding client for an HTTP embedding server."""

    def __init__(self, endpoint: str, model: str, timeout: float = 120.0) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self._client = httpx.Client(timeout=timeout)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        body = {"model": self.model, "input": texts}
        try:
            response = self._client.post(f"{self.endpoint}/api/embed", json=body)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnreachable(
                f"embedding backend at {self.endpoint}: {exc}"
            ) from exc
        data = response.json()
        vectors = data.get("embeddings")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise BackendError(f"embedding response malformed: {data!r}")
        return [[float(x) for x in vec] for vec in vectors]


class MockEmbedder:
    """Deterministic hash-derived unit vectors for offline runs.

    Component 0 is always zero so a test can hand out an override vector
    along axis 0 that is exactly orthogonal to every derived vector.
    ``overrides`` pins chosen texts to explicit vectors.
    """

    def __init__(
        self,
        dim: int = 32,
        model: str | None = None,
        overrides: dict[str, list[float]] | None = None,
    ) -> None:
        if dim < 2:
            raise ValueError("mock embedder needs dim >= 2")
        self.dim = dim
        # the dimension is part of the identity: indexes built at one dim are
        # stale for a mock at another
        self.model = model if model is not None else f"mock-embed-d{dim}"
        self.overrides = {k: list(map(float, v)) for k, v in (overrides or {}).items()}
        for text, vec in self.overrides.items():
            if len(vec) != dim:
                raise ValueError(f"override for {text!r} has wrong dimension")

    def _derive(self, text: str) -> list[float]:
        digest = hashlib.sha256(f"{self.model}\x00{text}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.uniform(-1.0, 1.0, self.dim)
        vec[0] = 0.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:  # vanishingly unlikely; reseed deterministically
            vec[1] = 1.0
            norm = 1.0
        return [float(x) for x in vec / norm]

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [
            list(self.overrides[t]) if t in self.overrides else self._derive(t)
            for t in texts
        ]


class FailingEmbedder:
    """Embedder that always raises; for exercising failure paths in tests."""

    model = "failing-embed"

    def embed(self, texts: list[str]) -> list[list[float]]:
        raise BackendUnreachable("embedding backend configured to fail")
