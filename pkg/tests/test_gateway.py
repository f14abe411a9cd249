import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from balancesim.gateway import ChatClient, EndpointConfig, ProtocolError, TransportError, chat_complete

FIXTURE = "My new appraisal of Individual 0 will be negative.\n\nExplanation: “quoted”  spacing kept "


def completion(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class Recorder:
    """Mock endpoint that replays a list of responses and keeps every request."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request):
        self.requests.append(request)
        item = self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]
        if isinstance(item, Exception):
            raise item
        return item

    @property
    def bodies(self):
        return [json.loads(r.content) for r in self.requests]


def client(recorder, sleeps=None, **kw):
    cfg = EndpointConfig(base_url="http://mock/v1/", model="m", **kw)
    return ChatClient(cfg, transport=httpx.MockTransport(recorder), sleep=(sleeps.append if sleeps is not None else lambda s: None))


def test_fixture_returned_verbatim():
    rec = Recorder(completion(FIXTURE))
    assert client(rec).complete("hi") == FIXTURE
    assert str(rec.requests[0].url) == "http://mock/v1/chat/completions"


def test_chat_complete_helper():
    rec = Recorder(completion("ok"))
    assert chat_complete(EndpointConfig(base_url="http://mock/v1"), "hi", transport=httpx.MockTransport(rec)) == "ok"


def test_request_shape():
    rec = Recorder(completion("ok"))
    client(rec, temperature=0.0, max_tokens=77).complete("the prompt")
    body = rec.bodies[0]
    assert body["messages"] == [{"role": "user", "content": "the prompt"}]
    assert body["temperature"] == 0.0
    assert body["max_tokens"] == 77
    assert body["model"] == "m"


def test_temperature_never_deviates():
    rec = Recorder(httpx.Response(503), completion("ok"))
    c = client(rec, temperature=0.3)
    for _ in range(3):
        c.complete("x")
    assert len(rec.bodies) == 4
    assert {b["temperature"] for b in rec.bodies} == {0.3}


def test_retries_after_two_500s():
    sleeps = []
    rec = Recorder(httpx.Response(500), httpx.Response(500), completion("done"))
    assert client(rec, sleeps, backoff=0.5).complete("x") == "done"
    assert len(rec.requests) == 3
    assert sleeps == [0.5, 1.0]


def test_timeout_exhausts_budget():
    sleeps = []
    rec = Recorder(httpx.ReadTimeout("slow"))
    with pytest.raises(TransportError):
        client(rec, sleeps, retries=2).complete("x")
    assert len(rec.requests) == 3
    assert len(sleeps) == 2


def test_client_error_is_not_retried():
    rec = Recorder(httpx.Response(401, text="no"), completion("never"))
    with pytest.raises(TransportError):
        client(rec).complete("x")
    assert len(rec.requests) == 1


@pytest.mark.parametrize("resp", [
    httpx.Response(200, text="not json"),
    httpx.Response(200, json={"choices": []}),
    httpx.Response(200, json={"choices": [{"message": {"content": None}}]}),
])
def test_malformed_body(resp):
    rec = Recorder(resp, completion("never"))
    with pytest.raises(ProtocolError):
        client(rec).complete("x")
    assert len(rec.requests) == 1


def test_bearer_token_from_env(monkeypatch):
    monkeypatch.setenv("BALANCESIM_TEST_TOKEN", "s3cret")
    rec = Recorder(completion("ok"))
    client(rec, api_key_env="BALANCESIM_TEST_TOKEN").complete("x")
    assert rec.requests[0].headers["authorization"] == "Bearer s3cret"


def test_no_token_no_header(monkeypatch):
    monkeypatch.delenv("BALANCESIM_TEST_TOKEN", raising=False)
    rec = Recorder(completion("ok"))
    client(rec, api_key_env="BALANCESIM_TEST_TOKEN").complete("x")
    assert "authorization" not in rec.requests[0].headers


def test_in_flight_cap():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def handler(request):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.01)
        with lock:
            state["now"] -= 1
        return completion("ok")

    c = client(handler, max_in_flight=3)
    with ThreadPoolExecutor(12) as pool:
        assert list(pool.map(c.complete, ["x"] * 40)) == ["ok"] * 40
    assert 1 <= state["peak"] <= 3
