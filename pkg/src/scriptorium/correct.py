"""LLM integration: post-correct transcriptions, transcribe images directly,
and translate to English, behind a provider abstraction.

The correction contract is strict about line structure: models are told to
preserve line breaks, but they sometimes do not, so the response's line
count is validated locally and the call is retried; after the retry budget
the original lines are returned unchanged with the fallback flag set.
Correction requests never attach the image, only the text.

Providers: a generic JSON-over-HTTPS chat/vision backend (shaped for
Gemini-style ``generateContent`` endpoints) and a deterministic scriptable
mock for offline use.  API keys come from an environment variable and are
never logged or embedded in errors.
"""

from __future__ import annotations

import base64
import os
import time
from dataclasses import dataclass, field

import requests

from .lineproc import RasterImage

CORRECTION_PROMPT = (
    "I ran a handwriting recognition neural network on a medieval English "
    "legal case, written in Latin.  Please try to correct the mistakes.  The "
    "neural network doesn't typically add or remove entire words, so try to "
    "keep a similar word count, if possible.  Also, preserve the line breaks "
    "at all costs.  If you see a very short line, don't delete it or merge "
    "it with the previous or next line, because it's likely an interlinear "
    "addition.  Keep in mind that this is medieval, not classical, Latin.  "
    "Please don't add punctuation unless necessary, because these documents "
    "usually don't have much punctuation.  Do not output anything other than "
    "the corrected transcription--no explanations, comments, or alternatives."
)

TRANSCRIPTION_PROMPT = (
    "Attached is a medieval English legal case, written in Latin. Please "
    "transcribe it line by line in vertical order, and don't output anything "
    "other than the transcription. Interlinear additions count as "
    "independent lines. Transparently expand all abbreviations and don't put "
    "the expansion in square brackets. Don't add punctuation that isn't in "
    "the manuscript. When you're not sure, take your best guess instead of "
    "putting [?] or indicating multiple possible alternatives."
)

TRANSLATION_PROMPT = (
    "Translate the following medieval Latin legal text into modern English. "
    "Output only the translation."
)


class ProviderError(Exception):
    """Network, auth, or protocol failure talking to the provider."""


class NoOutput(Exception):
    """The provider returned an empty or refused response."""


@dataclass
class ProviderConfig:
    endpoint: str
    model: str
    api_key_env: str = "LLM_API_KEY"
    timeout_s: float = 120.0
    max_retries: int = 2
    backoff_range_s: tuple[float, float] = (1.0, 4.0)

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _scrub(text: str, secret: str | None) -> str:
    if secret:
        return text.replace(secret, "[redacted]")
    return text


class HttpProvider:
    """Gemini-style generateContent client over plain JSON/HTTPS."""

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    @property
    def max_retries(self) -> int:
        return self.config.max_retries

    def _key(self) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise ProviderError(
                f"no API key in environment variable {self.config.api_key_env!r}"
            )
        return key

    def _call(self, payload: dict) -> str:
        key = self._key()
        url = f"{self.config.endpoint.rstrip('/')}/models/{self.config.model}:generateContent"
        try:
            response = self.session.post(
                url,
                params={"key": key},
                json=payload,
                timeout=self.config.timeout_s,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"request failed: {_scrub(str(exc), key)}") from None
        if response.status_code != 200:
            raise ProviderError(
                f"provider returned HTTP {response.status_code}: "
                f"{_scrub(response.text[:300], key)}"
            )
        try:
            body = response.json()
            parts = body["candidates"][0]["content"]["parts"]
            text = "".join(part.get("text", "") for part in parts)
        except (ValueError, KeyError, IndexError) as exc:
            raise ProviderError(f"malformed provider response: {type(exc).__name__}") from None
        if not text.strip():
            raise NoOutput("provider returned no text")
        return text

    def chat(self, system_prompt: str, user_text: str) -> str:
        return self._call({
            "system_instruction": {"parts": [{"text": system_prompt}]},
            "contents": [{"role": "user", "parts": [{"text": user_text}]}],
        })

    def vision(self, prompt: str, image_png: bytes) -> str:
        return self._call({
            "contents": [{
                "role": "user",
                "parts": [
                    {"text": prompt},
                    {"inline_data": {
                        "mime_type": "image/png",
                        "data": base64.b64encode(image_png).decode("ascii"),
                    }},
                ],
            }],
        })


@dataclass
class MockProvider:
    """Deterministic scriptable provider for offline tests and demos.

    ``responses`` are consumed in order; a response may be a string, an
    exception instance to raise, or a callable of the request text.  When
    the script is exhausted the last behavior repeats; with no script the
    mock echoes the request text.
    """

    responses: list = field(default_factory=list)
    max_retries: int = 2
    requests_seen: list = field(default_factory=list)

    def _next(self, sent_text: str) -> str:
        self.requests_seen.append(sent_text)
        if not self.responses:
            return sent_text
        index = min(len(self.requests_seen) - 1, len(self.responses) - 1)
        action = self.responses[index]
        if isinstance(action, Exception):
            raise action
        if callable(action):
            return action(sent_text)
        return action

    def chat(self, system_prompt: str, user_text: str) -> str:
        return self._next(user_text)

    def vision(self, prompt: str, image_png: bytes) -> str:
        return self._next(prompt)


@dataclass
class CorrectionResult:
    lines: list[str]
    changed: list[bool]
    attempts: int
    fallback: bool


def _sleep_backoff(provider, attempt: int) -> None:
    config = getattr(provider, "config", None)
    if config is None:
        return
    lo, hi = config.backoff_range_s
    # deterministic-but-jittered: spread retries without an RNG dependency
    span = hi - lo
    time.sleep(lo + span * ((attempt * 2654435761 % 1000) / 1000.0))


def correct_transcription(lines: list[str], provider) -> CorrectionResult:
    """Ask the provider to fix recognition errors, preserving line structure.

    The reply must contain exactly one output line per input line; replies
    with any other shape are retried up to the provider's retry budget, and
    after that the input is returned unchanged with ``fallback=True``.
    """
    if not lines:
        raise ValueError("need at least one line")
    joined = "\n".join(lines)
    attempts = 0
    max_retries = getattr(provider, "max_retries", 2)
    while attempts <= max_retries:
        attempts += 1
        reply = provider.chat(CORRECTION_PROMPT, joined)
        out_lines = reply.splitlines()
        while out_lines and not out_lines[-1].strip():
            out_lines.pop()
        if len(out_lines) == len(lines):
            return CorrectionResult(
                lines=out_lines,
                changed=[a != b for a, b in zip(out_lines, lines)],
                attempts=attempts,
                fallback=False,
            )
        if attempts <= max_retries:
            _sleep_backoff(provider, attempts)
    return CorrectionResult(
        lines=list(lines),
        changed=[False] * len(lines),
        attempts=attempts,
        fallback=True,
    )


def llm_transcribe(image: RasterImage, provider) -> list[str]:
    """Ask a vision provider to transcribe a page image directly.

    Returns raw lines with no count validation (there is no prior line
    count to check against; callers compare with segmentation).  Raises
    :class:`NoOutput` when the provider declines to answer.
    """
    reply = provider.vision(TRANSCRIPTION_PROMPT, image.to_png())
    lines = [line for line in reply.splitlines() if line.strip()]
    if not lines:
        raise NoOutput("transcription request returned no lines")
    return lines


def translate(lines: list[str], provider) -> str:
    """Translate Latin transcription lines into modern English prose."""
    if not lines:
        raise ValueError("need at least one line")
    reply = provider.chat(TRANSLATION_PROMPT, "\n".join(lines))
    if not reply.strip():
        raise NoOutput("translation request returned no text")
    return reply
