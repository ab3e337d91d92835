import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from lamdrl.strategy import (MockProvider, OperatorIntent, PromptAggregates, ProviderError, RemoteProvider,
                             StrategyEmbeddingTable, StrategyLabel, build_prompt, embed, intent_for_episode,
                             mock_strategy, parse_label, query_provider)


def aggregates(weather="nominal", counts=(7, 2, 1), last=None):
    return PromptAggregates(weather, counts, 175.3, 12.25, last)


def test_prompt_deterministic_and_complete():
    a = build_prompt(aggregates(), OperatorIntent.FAIRNESS)
    b = build_prompt(aggregates(), OperatorIntent.FAIRNESS)
    assert a.rendered_text == b.rendered_text and a.digest == b.digest
    text = a.rendered_text
    assert "no history" in text
    assert "evenly" in text  # fairness objective sentence
    assert text.rstrip().endswith("Respond with exactly one letter: A, B, C, or D")
    for label in "ABCD":
        assert f"  {label}: " in text
    assert "nominal" in text and "7 equatorial" in text


def test_prompt_with_history():
    p = build_prompt(aggregates(last=(61.2e6, 0.41, 0.9)), OperatorIntent.EFFICIENCY)
    assert "no history" not in p.rendered_text
    assert "61.20 Mbps" in p.rendered_text


@pytest.mark.parametrize("intent,weather,counts,expected", [
    (OperatorIntent.FAIRNESS, "extreme", (7, 2, 1), "B"),
    (OperatorIntent.FAIRNESS, "nominal", (7, 2, 1), "B"),
    (OperatorIntent.CHALLENGING_COVERAGE, "nominal", (7, 2, 1), "C"),
    (OperatorIntent.CHALLENGING_COVERAGE, "extreme", (7, 2, 1), "C"),
    (OperatorIntent.EFFICIENCY, "nominal", (7, 2, 1), "D"),
    (OperatorIntent.EFFICIENCY, "extreme", (7, 2, 1), "A"),
    (OperatorIntent.EFFICIENCY, "extreme", (6, 2, 2), "A"),
    (OperatorIntent.EFFICIENCY, "extreme", (5, 3, 2), "C"),
])
def test_mock_rule_table(intent, weather, counts, expected):
    assert mock_strategy(build_prompt(aggregates(weather, counts), intent)) is StrategyLabel(expected)


@pytest.mark.parametrize("reply,expected", [
    ("Strategy: C; prioritize high latitudes", "C"),
    ("B", "B"),
    ("  d ", None),
    ("maybe", None),
    ("ABCD", None),
    ("answer=(A)", "A"),
    ("", None),
])
def test_parse_label(reply, expected):
    got = parse_label(reply)
    assert (got.value if got else None) == expected


class Canned:
    name = "canned"

    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = 0

    def query(self, prompt):
        self.calls += 1
        r = self.replies.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def test_query_paths():
    prompt = build_prompt(aggregates("extreme"), OperatorIntent.FAIRNESS)
    ok = query_provider(prompt, Canned("Strategy: C"))
    assert ok.label is StrategyLabel.C and not ok.fallback and ok.attempts == 1
    retry = query_provider(prompt, Canned("maybe", "D"))
    assert retry.label is StrategyLabel.D and retry.attempts == 2 and not retry.fallback
    bad = Canned("maybe", "no idea")
    fb = query_provider(prompt, bad)
    assert fb.fallback and fb.label is StrategyLabel.B and bad.calls == 2
    down = query_provider(prompt, Canned(ProviderError("timeout"), ProviderError("timeout")))
    assert down.fallback and down.label is StrategyLabel.B


def test_remote_provider_wraps_errors():
    def boom(text):
        raise TimeoutError("slow")
    p = RemoteProvider("http://x", "m", transport=boom)
    with pytest.raises(ProviderError):
        p.query(build_prompt(aggregates(), OperatorIntent.FAIRNESS))
    with pytest.raises(ProviderError):
        RemoteProvider(None).query(build_prompt(aggregates(), OperatorIntent.FAIRNESS))


def test_remote_provider_from_env(monkeypatch):
    monkeypatch.setenv("LAM_ENDPOINT", "http://localhost:1/x")
    monkeypatch.setenv("LAM_MODEL", "m1")
    monkeypatch.setenv("LAM_TIMEOUT_S", "2.5")
    p = RemoteProvider.from_env()
    assert (p.endpoint, p.model, p.timeout) == ("http://localhost:1/x", "m1", 2.5)


@pytest.fixture
def server():
    seen = []
    replies = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            seen.append(body)
            out = replies.pop(0).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    httpd = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}/", seen, replies
    httpd.shutdown()


def test_remote_provider_over_http(server):
    url, seen, replies = server
    replies.extend(["I pick A.", "garbage", "still garbage"])
    provider = RemoteProvider(url, "test-model", timeout=5)
    prompt = build_prompt(aggregates(), OperatorIntent.EFFICIENCY)
    ctx = query_provider(prompt, provider)
    assert ctx.label is StrategyLabel.A and not ctx.fallback
    assert seen[0] == {"model": "test-model", "prompt": prompt.rendered_text}
    ctx = query_provider(prompt, provider)
    assert ctx.fallback and ctx.label is StrategyLabel.D
    assert provider.calls == 3


def test_unreachable_endpoint_falls_back():
    provider = RemoteProvider("http://127.0.0.1:9/", timeout=0.5)
    ctx = query_provider(build_prompt(aggregates(), OperatorIntent.CHALLENGING_COVERAGE), provider)
    assert ctx.fallback and ctx.label is StrategyLabel.C


def test_intent_rotation():
    assert [intent_for_episode(i).value for i in range(4)] == ["Fairness", "Efficiency", "ChallengingCoverage",
                                                               "Fairness"]
    assert intent_for_episode(5, OperatorIntent.FAIRNESS) is OperatorIntent.FAIRNESS


def test_embedding_lookup():
    table = StrategyEmbeddingTable(16, np.random.default_rng(0))
    assert table.weights.shape == (4, 16)
    assert np.all(np.abs(table.weights) <= 0.1)
    np.testing.assert_array_equal(embed(StrategyLabel.A, table), table.weights[0])
    np.testing.assert_array_equal(embed(StrategyLabel.C, table), embed(StrategyLabel.C, table))
    again = StrategyEmbeddingTable(16, np.random.default_rng(0))
    np.testing.assert_array_equal(again.weights, table.weights)


def test_mock_provider_counts_calls():
    m = MockProvider()
    assert m.query(build_prompt(aggregates(), OperatorIntent.FAIRNESS)) == "B"
    assert m.calls == 1
