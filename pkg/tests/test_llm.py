import json

import httpx
import pytest

from migmate import llm
from migmate.errors import (
    EmptyResponse,
    FileTooLarge,
    MissingApiKey,
    MockTranscriptMiss,
    ModelRefusal,
    TransportError,
)
from migmate.scanner import RelevantFile


def rf(path="src/client.py", content="import requests\n"):
    return RelevantFile(path=path, import_lines=[1], content=content)


def test_prompt_contains_both_libraries_and_full_file():
    file = rf(content="import requests\nresp = requests.get(url)\n")
    prompt = llm.build_prompt("requests", "httpx", file)
    rendered = prompt.rendered()
    assert "requests" in rendered and "httpx" in rendered
    assert file.content in rendered


def test_prompt_for_empty_file_is_well_formed():
    prompt = llm.build_prompt("tablib", "pandas", rf(content=""))
    assert "tablib" in prompt.rendered() and "pandas" in prompt.rendered()
    assert prompt.messages()[0]["role"] == "system"


def test_prompt_rendering_is_deterministic():
    a = llm.build_prompt("requests", "httpx", rf()).rendered()
    b = llm.build_prompt("requests", "httpx", rf()).rendered()
    assert a == b


def test_extract_single_fence():
    code, elided = llm.extract_code("Here:\n```python\nimport httpx\n```")
    assert code == "import httpx\n"
    assert elided is False


def test_extract_prefers_longest_fence():
    short = "```\n" + "x\n" + "```"
    long = "```python\n" + "y\n" * 40 + "```"
    code, _ = llm.extract_code(f"{short}\nand\n{long}")
    assert code == "y\n" * 40


def test_extract_without_fence_returns_raw():
    code, _ = llm.extract_code("import httpx\n")
    assert code == "import httpx\n"


def test_extract_blank_raises():
    with pytest.raises(EmptyResponse):
        llm.extract_code("   \n")


def test_extract_empty_fence_raises():
    with pytest.raises(EmptyResponse):
        llm.extract_code("Sure. Here you go:\n```python\n```")


def test_elision_marker_detected():
    code, elided = llm.extract_code(
        "```python\ndef f(): ...\n# rest of the code stays the same\n```"
    )
    assert elided is True
    assert llm.find_elision_lines(code) == [1]


def test_standalone_ellipsis_is_a_marker():
    assert llm.is_elided("def f():\n    pass\n...\n")
    assert llm.is_elided("# ...\n")
    assert not llm.is_elided("def f(): ...\n")


def test_custom_marker_list_overrides_default():
    text = "# snip here\n"
    assert not llm.is_elided(text)
    assert llm.is_elided(text, ["snip here"])


TRANSCRIPT = """\
=== file: src/client.py ===
```python
import httpx
```
=== file: src/other.py ===
plain body
"""


def test_transcript_parse_and_lookup(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(TRANSCRIPT)
    backend = llm.MockBackend(path)
    raw, usage = backend.complete(llm.LlmConfig(), llm.build_prompt("a", "b", rf()))
    assert raw == "```python\nimport httpx\n```\n"
    assert usage is None
    response = llm.complete(llm.LlmConfig(), llm.build_prompt("a", "b", rf()), backend)
    assert response.extracted_code == "import httpx\n"


def test_transcript_miss_names_the_file(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(TRANSCRIPT)
    backend = llm.MockBackend(path)
    prompt = llm.build_prompt("a", "b", rf(path="src/unknown.py"))
    with pytest.raises(MockTranscriptMiss, match="src/unknown.py"):
        llm.complete(llm.LlmConfig(), prompt, backend)


def test_missing_api_key_raised_before_any_network(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)

    def explode(request):
        raise AssertionError("network must not be touched")

    backend = llm.HttpBackend(transport=httpx.MockTransport(explode))
    with pytest.raises(MissingApiKey, match="OPENAI_API_KEY"):
        backend.complete(llm.LlmConfig(), llm.build_prompt("a", "b", rf()))


def _completion_payload(content):
    return {
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5},
    }


def test_http_backend_round_trip(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test-123")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["Authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=_completion_payload("```python\nok\n```"))

    backend = llm.HttpBackend(transport=httpx.MockTransport(handler))
    logged = []
    response = llm.complete(
        llm.LlmConfig(model="test-model"),
        llm.build_prompt("requests", "httpx", rf()),
        backend,
        log=logged.append,
    )
    assert response.extracted_code == "ok\n"
    assert response.usage["prompt_tokens"] == 10
    assert seen["body"]["model"] == "test-model"
    assert seen["body"]["temperature"] == 0.0
    assert seen["auth"] == "Bearer sk-test-123"
    # metadata log never carries the key
    assert "sk-test-123" not in json.dumps(logged)
    assert logged[0]["file"] == "src/client.py"


def test_http_backend_retries_transient_failures(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "k")
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            return httpx.Response(503, text="busy")
        return httpx.Response(200, json=_completion_payload("fine"))

    backend = llm.HttpBackend(transport=httpx.MockTransport(handler), backoff=0.01)
    raw, _ = backend.complete(llm.LlmConfig(max_retries=3), llm.build_prompt("a", "b", rf()))
    assert raw == "fine"
    assert len(attempts) == 3


def test_http_backend_gives_up_after_retries(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "k")

    def handler(request):
        raise httpx.ConnectError("boom")

    backend = llm.HttpBackend(transport=httpx.MockTransport(handler), backoff=0.01)
    with pytest.raises(TransportError, match="2 attempts"):
        backend.complete(llm.LlmConfig(max_retries=1), llm.build_prompt("a", "b", rf()))


def test_refusal_when_no_content(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "k")

    def handler(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": None}}]})

    backend = llm.HttpBackend(transport=httpx.MockTransport(handler))
    with pytest.raises(ModelRefusal):
        backend.complete(llm.LlmConfig(), llm.build_prompt("a", "b", rf()))


def test_oversized_prompt_rejected(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(TRANSCRIPT)
    config = llm.LlmConfig(max_prompt_tokens=10)
    prompt = llm.build_prompt("a", "b", rf(content="x" * 500))
    with pytest.raises(FileTooLarge):
        llm.complete(config, prompt, llm.MockBackend(path))


def test_config_validation():
    with pytest.raises(ValueError):
        llm.LlmConfig(model="")
    with pytest.raises(ValueError):
        llm.LlmConfig(max_retries=-1)
    with pytest.raises(ValueError):
        llm.LlmConfig(timeout=0)
