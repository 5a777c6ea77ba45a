import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from leanctx.errors import ContextTooLarge, ProviderError, TemplateArityError
from leanctx.llm import (API_KEY_ENV, TEMPLATES, CompletionRecord, CostModel, MockLLM,
                         OpenAICompatibleClient, cost, cost_savings, parse_prompt, render_prompt)
from leanctx.text import count_tokens


def test_qa_template_wording():
    out = render_prompt("qa", "C", "Q")
    assert out.startswith("Answer to the question based on the given context.")
    assert "Context: C" in out and "Question: Q" in out
    assert "simply return 'No answer'" in out
    assert "if you do not find any answer in the context" in out


def test_cqsumdp_template_wording():
    out = render_prompt("cqsumdp", "the doc", "the query")
    assert "most reasonable summary relevant to its document-query pair" in out
    assert out.index("Document: the doc") < out.index("Query: the query")


def test_semantic_compression_template():
    out = render_prompt("semantic_compression", "some text")
    assert "compress the following text into a latent representation" in out
    assert out.endswith("Text to Compress: some text")
    with pytest.raises(TemplateArityError):
        render_prompt("semantic_compression", "some text", "q")


@pytest.mark.parametrize("name", ["qa", "cqsumdp"])
def test_query_required(name):
    with pytest.raises(TemplateArityError):
        render_prompt(name, "ctx")


def test_placeholders_inside_payload_are_not_expanded():
    ctx = "literal {QUERY} and {CONTEXT} stay"
    out = render_prompt("qa", ctx, "real question")
    assert ctx in out
    assert out.count("real question") == 1


@pytest.mark.parametrize("name", list(TEMPLATES))
def test_parse_roundtrip(name):
    q = None if name == "semantic_compression" else "Which one, exactly?"
    ctx = "First part. Second, with a comma.\nThird line."
    assert parse_prompt(render_prompt(name, ctx, q)) == (name, ctx, q)


def test_mock_extracts_max_overlap_sentence():
    llm = MockLLM()
    rec = llm.complete(render_prompt("qa", "The sky is blue. Grass is green.", "What color is grass?"))
    assert rec.answer == "Grass is green."


def test_mock_zero_overlap_returns_first_sentence():
    rec = MockLLM().complete(render_prompt("qa", "Alpha beta. Gamma delta.", "zzz?"))
    assert rec.answer == "Alpha beta."


def test_mock_token_accounting_and_determinism():
    llm = MockLLM()
    prompt = render_prompt("qa", "The sky is blue. Grass is green.", "What color is grass?")
    a, b = llm.complete(prompt), llm.complete(prompt)
    assert a == b
    assert a.prompt_tokens == count_tokens(None, prompt)
    assert a.completion_tokens == count_tokens(None, a.answer)
    assert a.summary_tokens == 0
    assert llm.calls == 2


def test_mock_summarizers_shrink():
    ctx = "Cats purr loudly at night. Dogs bark. Fish swim around the tank quietly."
    llm = MockLLM()
    assert llm.complete(render_prompt("cqsumdp", ctx, "why do cats purr")).answer == \
        "Cats purr loudly at night."
    comp = llm.complete(render_prompt("semantic_compression", ctx)).answer
    assert count_tokens(None, comp) < count_tokens(None, ctx)


def test_completion_record_total():
    rec = CompletionRecord(10, 3, "x", summary_tokens=7)
    assert rec.total_tokens == 20


def test_cost_zero_and_linear():
    model = CostModel(0.5, 2.0)
    assert cost(CompletionRecord(0, 0, ""), model) == 0
    assert cost(CompletionRecord(1000, 0, ""), CostModel(0.5, 0.0)) == pytest.approx(0.5)


def test_cost_matches_recomputation(rng):
    for _ in range(50):
        p, c, s = (int(x) for x in rng.integers(0, 5000, 3))
        pp, pc = (float(x) for x in rng.random(2))
        expected = pp * (p + s) / 1000 + pc * c / 1000
        assert cost(CompletionRecord(p, c, "", s), CostModel(pp, pc)) == pytest.approx(expected, rel=1e-12)


def test_negative_prices_rejected():
    with pytest.raises(ValueError):
        CostModel(-1, 0)


@pytest.mark.parametrize("base, variant, expected", [
    (547, 343, 37.29), (761, 245, 67.81), (761, 842, -10.64), (547, 631, -15.36),
    (547, 210, 61.62), (761, 278, 63.47), (547, 939, -71.66), (761, 1078, -41.66),
])
def test_cost_savings_table_values(base, variant, expected):
    assert cost_savings(base, variant) == pytest.approx(expected, abs=0.01)


def test_cost_savings_identity_and_sign():
    for x in (1, 7, 547, 10_000):
        assert cost_savings(x, x) == 0
        assert cost_savings(x, x - 1) > 0
    with pytest.raises(ZeroDivisionError):
        cost_savings(0, 5)


class _Handler(BaseHTTPRequestHandler):
    script: list = []
    seen: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.path, self.headers.get("Authorization"), body))
        status, payload = type(self).script.pop(0)
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.script, _Handler.seen = [], []
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=httpd.serve_forever, daemon=True)
    t.start()
    yield httpd, _Handler
    httpd.shutdown()


def _client(httpd, **kw):
    host, port = httpd.server_address
    return OpenAICompatibleClient(f"http://{host}:{port}", "test-model", backoff=0.0, **kw)


def test_http_chat_completion_wire_format(server, monkeypatch):
    httpd, h = server
    monkeypatch.setenv(API_KEY_ENV, "sk-test")
    h.script.append((200, {"choices": [{"message": {"role": "assistant", "content": " Paris "}}],
                           "usage": {"prompt_tokens": 12, "completion_tokens": 1}}))
    rec = _client(httpd).complete("Where?")
    assert rec == CompletionRecord(12, 1, "Paris")
    path, auth, body = h.seen[0]
    assert path == "/v1/chat/completions"
    assert auth == "Bearer sk-test"
    assert body["model"] == "test-model"
    assert body["messages"] == [{"role": "user", "content": "Where?"}]


def test_http_embeddings_wire_format(server):
    httpd, h = server
    h.script.append((200, {"data": [{"embedding": [3.0, 4.0]}]}))
    from leanctx.ingest import HTTPEmbedder
    vec = HTTPEmbedder(_client(httpd), 2).embed("hi")
    assert np.allclose(vec, [0.6, 0.8])
    assert h.seen[0][0] == "/v1/embeddings" and h.seen[0][2]["input"] == "hi"


def test_http_retries_then_succeeds(server):
    httpd, h = server
    h.script += [(503, {}), (200, {"choices": [{"message": {"content": "ok"}}], "usage": {}})]
    assert _client(httpd, max_retries=2).complete("x").answer == "ok"
    assert len(h.seen) == 2


def test_http_status_error(server):
    httpd, h = server
    h.script.append((401, {"error": {"message": "bad key"}}))
    with pytest.raises(ProviderError) as ei:
        _client(httpd).complete("x")
    assert ei.value.status == 401 and not ei.value.retryable


def test_http_context_too_large(server):
    httpd, h = server
    h.script.append((400, {"error": {"code": "context_length_exceeded", "message": "too long"}}))
    with pytest.raises(ContextTooLarge):
        _client(httpd).complete("x")


def test_http_transport_failure_is_retryable():
    client = OpenAICompatibleClient("http://127.0.0.1:9", "m", max_retries=1, backoff=0.0, timeout=1)
    with pytest.raises(ProviderError) as ei:
        client.complete("x")
    assert ei.value.retryable and ei.value.attempts == 2
