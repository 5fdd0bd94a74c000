import numpy as np
import pytest

from scriptorium.correct import (
    CORRECTION_PROMPT,
    TRANSCRIPTION_PROMPT,
    HttpProvider,
    MockProvider,
    NoOutput,
    ProviderConfig,
    ProviderError,
    correct_transcription,
    llm_transcribe,
    translate,
)
from scriptorium.lineproc import RasterImage

# Frozen copies of the canonical prompt strings.  The library constants must
# stay byte-identical to these; any drift is a contract break, not a tweak.
GOLDEN_CORRECTION = (
    "I ran a handwriting recognition neural network on a medieval English legal case, "
    "written in Latin.  Please try to correct the mistakes.  The neural network doesn't "
    "typically add or remove entire words, so try to keep a similar word count, if "
    "possible.  Also, preserve the line breaks at all costs.  If you see a very short "
    "line, don't delete it or merge it with the previous or next line, because it's "
    "likely an interlinear addition.  Keep in mind that this is medieval, not classical, "
    "Latin.  Please don't add punctuation unless necessary, because these documents "
    "usually don't have much punctuation.  Do not output anything other than the "
    "corrected transcription--no explanations, comments, or alternatives."
)
GOLDEN_TRANSCRIPTION = (
    "Attached is a medieval English legal case, written in Latin. Please transcribe it "
    "line by line in vertical order, and don't output anything other than the "
    "transcription. Interlinear additions count as independent lines. Transparently "
    "expand all abbreviations and don't put the expansion in square brackets. Don't add "
    "punctuation that isn't in the manuscript. When you're not sure, take your best "
    "guess instead of putting [?] or indicating multiple possible alternatives."
)


class TestGoldenPrompts:
    def test_correction_prompt_is_byte_identical(self):
        assert CORRECTION_PROMPT == GOLDEN_CORRECTION

    def test_transcription_prompt_is_byte_identical(self):
        assert TRANSCRIPTION_PROMPT == GOLDEN_TRANSCRIPTION


def tiny_image():
    return RasterImage(np.full((8, 8), 0.5, dtype=np.float32))


class TestCorrectTranscription:
    def test_echo_mock_changes_nothing(self):
        result = correct_transcription(["una linea", "altera"], MockProvider())
        assert result.lines == ["una linea", "altera"]
        assert result.changed == [False, False]
        assert result.fallback is False
        assert result.attempts == 1

    def test_wrong_count_twice_then_success(self, monkeypatch):
        monkeypatch.setattr("scriptorium.correct._sleep_backoff", lambda *a: None)
        mock = MockProvider(responses=["only one line", "only one line", "linea a\nlinea b"])
        result = correct_transcription(["x y", "z"], mock)
        assert result.attempts == 3
        assert result.fallback is False
        assert result.lines == ["linea a", "linea b"]
        assert result.changed == [True, True]

    def test_persistent_wrong_count_falls_back_to_input(self, monkeypatch):
        monkeypatch.setattr("scriptorium.correct._sleep_backoff", lambda *a: None)
        mock = MockProvider(responses=["wrong"], max_retries=2)
        result = correct_transcription(["a", "b", "c"], mock)
        assert result.fallback is True
        assert result.lines == ["a", "b", "c"]
        assert result.attempts == 3

    def test_trailing_blank_lines_tolerated(self):
        mock = MockProvider(responses=["a fixed\nb fixed\n\n"])
        result = correct_transcription(["a", "b"], mock)
        assert result.lines == ["a fixed", "b fixed"]

    def test_request_preserves_line_joins(self):
        mock = MockProvider()
        correct_transcription(["primus", "secundus"], mock)
        assert mock.requests_seen == ["primus\nsecundus"]

    def test_provider_error_propagates(self):
        mock = MockProvider(responses=[ProviderError("auth failed")])
        with pytest.raises(ProviderError):
            correct_transcription(["a"], mock)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            correct_transcription([], MockProvider())


class TestLlmTranscribe:
    def test_fixed_lines_pass_through(self):
        mock = MockProvider(responses=["linea una\nlinea duo\nlinea tres"])
        assert llm_transcribe(tiny_image(), mock) == ["linea una", "linea duo", "linea tres"]

    def test_empty_reply_is_no_output(self):
        mock = MockProvider(responses=[""])
        with pytest.raises(NoOutput):
            llm_transcribe(tiny_image(), mock)

    def test_prompt_sent_verbatim(self):
        mock = MockProvider(responses=["x"])
        llm_transcribe(tiny_image(), mock)
        assert mock.requests_seen == [TRANSCRIPTION_PROMPT]


class TestTranslate:
    def test_echo(self):
        mock = MockProvider()
        out = translate(["linea una", "linea duo"], mock)
        assert out == "linea una\nlinea duo"

    def test_empty_reply_is_error(self):
        mock = MockProvider(responses=["  "])
        with pytest.raises(NoOutput):
            translate(["a"], mock)

    def test_prompt_contains_all_lines_in_order(self):
        mock = MockProvider(responses=["fine"])
        translate(["alpha", "beta", "gamma"], mock)
        sent = mock.requests_seen[0]
        assert sent.index("alpha") < sent.index("beta") < sent.index("gamma")


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, response=None, exc=None):
        self.response = response
        self.exc = exc
        self.calls = []

    def post(self, url, params=None, json=None, timeout=None):
        self.calls.append({"url": url, "params": params, "json": json})
        if self.exc is not None:
            raise self.exc
        return self.response


def provider_with(response=None, exc=None, env="TEST_LLM_KEY"):
    config = ProviderConfig(endpoint="https://llm.example/v1", model="m1", api_key_env=env)
    return HttpProvider(config, session=FakeSession(response=response, exc=exc))


class TestHttpProvider:
    def test_chat_parses_candidates(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        payload = {"candidates": [{"content": {"parts": [{"text": "corrected"}]}}]}
        provider = provider_with(response=FakeResponse(payload=payload))
        assert provider.chat("system", "user") == "corrected"
        call = provider.session.calls[0]
        assert call["url"].endswith("/models/m1:generateContent")
        assert call["json"]["system_instruction"]["parts"][0]["text"] == "system"

    def test_vision_attaches_png(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        payload = {"candidates": [{"content": {"parts": [{"text": "lines"}]}}]}
        provider = provider_with(response=FakeResponse(payload=payload))
        provider.vision("look", b"\x89PNG...")
        parts = provider.session.calls[0]["json"]["contents"][0]["parts"]
        assert parts[0]["text"] == "look"
        assert parts[1]["inline_data"]["mime_type"] == "image/png"

    def test_missing_key_is_provider_error(self, monkeypatch):
        monkeypatch.delenv("ABSENT_KEY", raising=False)
        provider = provider_with(env="ABSENT_KEY")
        with pytest.raises(ProviderError, match="ABSENT_KEY"):
            provider.chat("s", "u")

    def test_http_error_is_provider_error(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        provider = provider_with(response=FakeResponse(status_code=403, text="forbidden"))
        with pytest.raises(ProviderError, match="403"):
            provider.chat("s", "u")

    def test_empty_candidates_is_no_output(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        payload = {"candidates": [{"content": {"parts": [{"text": "   "}]}}]}
        provider = provider_with(response=FakeResponse(payload=payload))
        with pytest.raises(NoOutput):
            provider.chat("s", "u")

    def test_api_key_never_appears_in_errors(self, monkeypatch):
        secret = "sk-SUPER-SECRET-12345"
        monkeypatch.setenv("TEST_LLM_KEY", secret)
        # error text that embeds the key (e.g. echoed auth URL) must be scrubbed
        provider = provider_with(
            response=FakeResponse(status_code=401, text=f"bad key {secret} rejected")
        )
        with pytest.raises(ProviderError) as excinfo:
            provider.chat("s", "u")
        assert secret not in str(excinfo.value)

    def test_network_exception_scrubbed(self, monkeypatch):
        import requests as requests_lib

        secret = "sk-ANOTHER-SECRET"
        monkeypatch.setenv("TEST_LLM_KEY", secret)
        provider = provider_with(exc=requests_lib.ConnectionError(f"refused ?key={secret}"))
        with pytest.raises(ProviderError) as excinfo:
            provider.chat("s", "u")
        assert secret not in str(excinfo.value)

    def test_retry_config_validation(self):
        with pytest.raises(ValueError):
            ProviderConfig(endpoint="e", model="m", max_retries=-1)
