"""Prompt construction, completion backends, and code extraction.

Two backends share one interface: an OpenAI-compatible chat-completions
endpoint over HTTP, and a deterministic mock driven by a transcript file
mapping workspace-relative paths to scripted responses. The mock keeps the
whole pipeline runnable with zero network activity; a transcript miss is a
hard error so tests cannot silently fall through.

Transcript format (one entry per file, order irrelevant)::

    === file: src/client.py ===
    ...response text, typically a fenced code block...
    === file: src/report.py ===
    ...

"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import (
    EmptyResponse,
    FileTooLarge,
    MissingApiKey,
    MockTranscriptMiss,
    ModelRefusal,
    TransportError,
)
from .scanner import RelevantFile

DEFAULT_MODEL = "gpt-4o-mini"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"

# comment lines signalling the model omitted unchanged code
DEFAULT_ELISION_MARKERS = [
    "rest of the code",
    "remaining code",
    "unchanged",
    "same as before",
]

SYSTEM_PREAMBLE = (
    "You are a careful code migration assistant. Rewrite the file you are "
    "given, replacing every usage of the source library with the target "
    "library. Preserve the program's behavior and public interface, and do "
    "not change anything unrelated to the migration. Return the complete "
    "migrated file in a single fenced code block."
)

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_TRANSCRIPT_HEADER = re.compile(r"^=== file: (?P<path>.+?) ===$")


@dataclass
class LlmConfig:
    model: str = DEFAULT_MODEL
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = DEFAULT_API_KEY_ENV
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    max_prompt_tokens: int = 100_000

    def __post_init__(self):
        if not self.model:
            raise ValueError("model must be non-empty")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class MigrationPrompt:
    source_lib: str
    target_lib: str
    file_path: str
    file_content: str
    system_preamble: str = SYSTEM_PREAMBLE

    def user_message(self) -> str:
        return (
            f"Migrate the following Python file from the library "
            f"'{self.source_lib}' to the library '{self.target_lib}'.\n"
            f"File: {self.file_path}\n"
            f"```python\n{self.file_content}```\n"
        )

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.system_preamble},
            {"role": "user", "content": self.user_message()},
        ]

    def rendered(self) -> str:
        return self.system_preamble + "\n\n" + self.user_message()


@dataclass
class LlmResponse:
    raw: str
    extracted_code: str
    elided: bool = False
    usage: dict | None = None


def build_prompt(source: str, target: str, file: RelevantFile) -> MigrationPrompt:
    return MigrationPrompt(
        source_lib=source,
        target_lib=target,
        file_path=file.path,
        file_content=file.content,
    )


def extract_code(raw: str, elision_markers: list[str] | None = None) -> tuple[str, bool]:
    """Content of the longest fenced block (or raw itself when unfenced)."""
    if not raw.strip():
        raise EmptyResponse("model response was blank")
    blocks = _FENCE.findall(raw)
    code = max(blocks, key=len) if blocks else raw
    if not code.strip():
        raise EmptyResponse("fenced code block was empty")
    return code, is_elided(code, elision_markers)


def find_elision_lines(text: str, markers: list[str] | None = None) -> list[int]:
    """0-based indices of lines that are elision placeholders."""
    markers = [m.lower() for m in (markers if markers is not None else DEFAULT_ELISION_MARKERS)]
    found = []
    for idx, line in enumerate(text.splitlines()):
        stripped = line.strip()
        if stripped == "...":
            found.append(idx)
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body == "..." or any(marker in body.lower() for marker in markers):
                found.append(idx)
    return found


def is_elided(text: str, markers: list[str] | None = None) -> bool:
    return bool(find_elision_lines(text, markers))


class MockBackend:
    """Deterministic transcript lookup; a miss is a hard error."""

    def __init__(self, transcript_path: str | Path):
        self.transcript_path = str(transcript_path)
        self.responses = parse_transcript(Path(transcript_path).read_text(encoding="utf-8"))

    def complete(self, config: LlmConfig, prompt: MigrationPrompt) -> tuple[str, dict | None]:
        if prompt.file_path not in self.responses:
            raise MockTranscriptMiss(
                f"transcript {self.transcript_path} has no entry for {prompt.file_path!r}"
            )
        return self.responses[prompt.file_path], None


def parse_transcript(text: str) -> dict[str, str]:
    responses: dict[str, str] = {}
    current: str | None = None
    body: list[str] = []
    for line in text.splitlines():
        header = _TRANSCRIPT_HEADER.match(line)
        if header:
            if current is not None:
                responses[current] = "\n".join(body) + ("\n" if body else "")
            current = header.group("path").strip()
            body = []
        elif current is not None:
            body.append(line)
    if current is not None:
        responses[current] = "\n".join(body) + ("\n" if body else "")
    return responses


class HttpBackend:
    """OpenAI-compatible chat-completions client with retry/backoff."""

    def __init__(self, transport: httpx.BaseTransport | None = None, backoff: float = 0.5):
        self._transport = transport
        self._backoff = backoff

    def complete(self, config: LlmConfig, prompt: MigrationPrompt) -> tuple[str, dict | None]:
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise MissingApiKey(
                f"environment variable {config.api_key_env} is not set; "
                f"export it or run with --mock-llm"
            )
        body = {
            "model": config.model,
            "messages": prompt.messages(),
            "temperature": config.temperature,
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        last_error: Exception | None = None
        with httpx.Client(
            base_url=config.base_url, timeout=config.timeout, transport=self._transport
        ) as client:
            for attempt in range(config.max_retries + 1):
                if attempt:
                    time.sleep(self._backoff * 2 ** (attempt - 1))
                try:
                    response = client.post("/chat/completions", json=body, headers=headers)
                except httpx.HTTPError as exc:
                    last_error = exc
                    continue
                if response.status_code >= 500:
                    last_error = TransportError(f"server error {response.status_code}")
                    continue
                if response.status_code != 200:
                    raise TransportError(
                        f"completion request rejected: {response.status_code}",
                        detail=response.text[:500],
                    )
                data = response.json()
                return _message_content(data), data.get("usage")
        raise TransportError(
            f"completion failed after {config.max_retries + 1} attempts: {last_error}"
        )


def _message_content(data: dict) -> str:
    choices = data.get("choices") or []
    message = (choices[0].get("message") or {}) if choices else {}
    content = message.get("content")
    if not content:
        raise ModelRefusal("completion contained no message content")
    return content


def complete(
    config: LlmConfig,
    prompt: MigrationPrompt,
    backend,
    elision_markers: list[str] | None = None,
    log=None,
) -> LlmResponse:
    """Run one completion and extract migrated code from it.

    ``log`` receives one metadata dict per request (model, path, duration,
    usage); the api key is never part of it.
    """
    estimated_tokens = len(prompt.rendered()) // 4
    if estimated_tokens > config.max_prompt_tokens:
        raise FileTooLarge(
            f"{prompt.file_path}: prompt is ~{estimated_tokens} tokens, "
            f"budget is {config.max_prompt_tokens}"
        )
    started = time.monotonic()
    raw, usage = backend.complete(config, prompt)
    if not raw or not raw.strip():
        raise ModelRefusal("completion was empty")
    code, elided = extract_code(raw, elision_markers)
    if log is not None:
        log(
            {
                "model": config.model,
                "file": prompt.file_path,
                "duration_s": round(time.monotonic() - started, 3),
                "usage": usage,
                "elided": elided,
                "backend": type(backend).__name__,
            }
        )
    return LlmResponse(raw=raw, extracted_code=code, elided=elided, usage=usage)
