import json
import random

import httpx
import pytest

from oracles import cache_key_oracle, rate_window_ok
from rdpipe.provider import (
    AuthError,
    LiveAdapter,
    ModelRequest,
    ModelResponse,
    ProviderError,
    ProviderTimeout,
    RateBudget,
    RateLimited,
    RateLimiter,
    RecordingAdapter,
    ReplayAdapter,
    ReplayMiss,
    RetriesExhausted,
    RetryPolicy,
    ServerError,
    StopReason,
    Unadmittable,
    cache_key,
    cassette_path,
    complete_with_retry,
    parse_messages_response,
)


def test_cache_key_matches_oracle():
    rng = random.Random(3)
    alphabet = 'ab "\\\n\t\r\x01é€{}'
    for _ in range(300):
        prompt = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        temp = rng.choice([0, 0.0, 0.5, 1, 2.0])
        req = ModelRequest("model-x", prompt, rng.randint(1, 9000), temp)
        assert cache_key(req) == cache_key_oracle("model-x", temp, req.max_output_tokens, prompt)


def test_cache_key_sensitivity():
    base = ModelRequest("m", "p", 100, 0.0)
    keys = {cache_key(base), cache_key(ModelRequest("m2", "p", 100, 0.0)),
            cache_key(ModelRequest("m", "p ", 100, 0.0)), cache_key(ModelRequest("m", "p", 101, 0.0)),
            cache_key(ModelRequest("m", "p", 100, 0.1))}
    assert len(keys) == 5
    assert cache_key(ModelRequest("m", "p", 100, 0)) == cache_key(base)


def test_request_validation():
    with pytest.raises(ValueError):
        ModelRequest("", "p")
    with pytest.raises(ValueError):
        ModelRequest("m", "p", temperature=2.5)
    with pytest.raises(ValueError):
        ModelRequest("m", "p", max_output_tokens=0)


def test_parse_messages_response():
    r = parse_messages_response({"content": [{"type": "text", "text": "a"}, {"type": "tool_use"},
                                             {"type": "text", "text": "b"}],
                                 "stop_reason": "max_tokens", "usage": {"input_tokens": 3, "output_tokens": 4}})
    assert (r.text, r.input_tokens, r.output_tokens, r.truncated) == ("ab", 3, 4, True)
    assert parse_messages_response({"content": "x", "stop_reason": "end_turn"}).stop_reason is StopReason.COMPLETE
    with pytest.raises(ServerError):
        parse_messages_response({"nope": 1})


def _live(stub, **kw):
    return LiveAdapter(stub.url, client=httpx.Client(timeout=5), **kw)


def test_live_adapter_round_trip(stub_server, monkeypatch):
    monkeypatch.setenv("GENAI_API_KEY", "secret-123")
    stub_server.reply_text('[{"a": 1}]', input_tokens=12, output_tokens=7)
    adapter = _live(stub_server, extra_headers={"anthropic-version": "2023-06-01"})
    resp = adapter.complete(ModelRequest("m-1", "hello", 256, 0.0))
    assert resp == ModelResponse('[{"a": 1}]', 12, 7, "complete")
    sent = stub_server.requests[0]
    assert sent["headers"]["x-api-key"] == "secret-123"
    assert sent["headers"]["anthropic-version"] == "2023-06-01"
    assert sent["body"] == {"model": "m-1", "max_tokens": 256, "temperature": 0.0,
                            "messages": [{"role": "user", "content": "hello"}]}


def test_live_adapter_bearer_auth(stub_server, monkeypatch):
    monkeypatch.setenv("OTHER_KEY", "k")
    stub_server.reply_text("{}")
    _live(stub_server, api_key_env="OTHER_KEY", auth_header="Authorization").complete(ModelRequest("m", "p"))
    assert stub_server.requests[0]["headers"]["Authorization"] == "Bearer k"


def test_live_adapter_needs_env_key(stub_server, monkeypatch):
    monkeypatch.delenv("GENAI_API_KEY", raising=False)
    with pytest.raises(AuthError):
        _live(stub_server).complete(ModelRequest("m", "p"))
    assert stub_server.requests == []


@pytest.mark.parametrize("status,headers,exc", [
    (401, {}, AuthError), (403, {}, AuthError), (429, {"retry-after": "7"}, RateLimited),
    (408, {}, ProviderTimeout), (500, {}, ServerError), (503, {}, ServerError), (400, {}, ProviderError),
])
def test_live_adapter_error_mapping(stub_server, monkeypatch, status, headers, exc):
    monkeypatch.setenv("GENAI_API_KEY", "k")
    stub_server.reply(status, {"error": "x"}, headers)
    with pytest.raises(exc) as info:
        _live(stub_server).complete(ModelRequest("m", "p"))
    if status == 429:
        assert info.value.retry_after == 7.0
    if status == 400:
        assert not isinstance(info.value, (ServerError, AuthError, RateLimited, ProviderTimeout))


def test_live_adapter_retries_through_stub(stub_server, monkeypatch):
    monkeypatch.setenv("GENAI_API_KEY", "k")
    stub_server.reply(500, {})
    stub_server.reply(429, {}, {"retry-after": "3"})
    stub_server.reply_text("[]")
    sleeps = []
    resp = complete_with_retry(_live(stub_server), ModelRequest("m", "p"),
                               RetryPolicy(initial_backoff=1, backoff_multiplier=2), sleep=sleeps.append)
    assert resp.text == "[]"
    assert sleeps == [1, 3.0]


class _Echo:
    def __init__(self):
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return ModelResponse(f"reply {self.calls}", 1, 2, "complete")


def test_record_then_replay(tmp_path):
    inner = _Echo()
    rec = RecordingAdapter(inner, tmp_path)
    req = ModelRequest("m", "prompt")
    assert rec.complete(req).text == "reply 1"
    path = cassette_path(tmp_path, cache_key(req))
    assert path.parent.name == cache_key(req)[:2]
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["request"] == req.to_dict() and doc["response"]["text"] == "reply 1"
    assert "recorded_at" in doc

    # Recording only appends: a second live call does not overwrite.
    assert rec.complete(req).text == "reply 2"
    assert json.loads(path.read_text(encoding="utf-8"))["response"]["text"] == "reply 1"
    assert ReplayAdapter(tmp_path).complete(req).text == "reply 1"


def test_replay_miss_never_goes_live(tmp_path):
    with pytest.raises(ReplayMiss) as exc:
        ReplayAdapter(tmp_path).complete(ModelRequest("m", "unseen"))
    assert exc.value.key == cache_key(ModelRequest("m", "unseen"))


class _Failing:
    def __init__(self, errors):
        self.errors = list(errors)
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        if self.errors:
            raise self.errors.pop(0)
        return ModelResponse("ok")


def test_retry_backoff_schedule_and_exhaustion():
    adapter = _Failing([ServerError("x")] * 10)
    sleeps = []
    stats = {}
    with pytest.raises(RetriesExhausted) as exc:
        complete_with_retry(adapter, ModelRequest("m", "p"),
                            RetryPolicy(max_attempts=4, initial_backoff=0.5, backoff_multiplier=3, max_backoff=4),
                            sleep=sleeps.append, stats=stats)
    assert adapter.calls == 4 == stats["attempts"] == exc.value.attempts
    assert sleeps == [0.5, 1.5, 4]
    assert isinstance(exc.value.last_error, ServerError)


def test_non_retryable_propagates_at_once():
    adapter = _Failing([AuthError("no")])
    with pytest.raises(AuthError):
        complete_with_retry(adapter, ModelRequest("m", "p"), sleep=lambda s: None)
    assert adapter.calls == 1


def test_jitter_stays_below_cap():
    p = RetryPolicy(initial_backoff=2, jitter=True)
    rng = random.Random(1)
    assert all(0 <= p.backoff(3, rng) <= 8 for _ in range(100))


class _Clock:
    def __init__(self):
        self.now = 0.0
        self.slept = []

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.slept.append(dt)
        self.now += dt


def test_rate_limiter_waits_minimal_time():
    clock = _Clock()
    lim = RateLimiter(RateBudget(100, 10), clock=clock, sleep=clock.sleep)
    lim.acquire(60)
    clock.now = 10
    lim.acquire(30)
    clock.now = 20
    assert lim.acquire(50) == pytest.approx(40)
    assert clock.now == pytest.approx(60)


def test_rate_limiter_request_budget():
    clock = _Clock()
    lim = RateLimiter(RateBudget(10_000, 3), clock=clock, sleep=clock.sleep)
    admitted = []
    for i in range(10):
        clock.now += 5
        lim.acquire(1)
        admitted.append((clock.now, 1))
    assert rate_window_ok(admitted, 10_000, 3)
    assert admitted[3][0] == pytest.approx(admitted[0][0] + 60)


def test_rate_limiter_wait_always_expires_the_event():
    # Float rounding: sleeping exactly the reported wait must admit.
    clock = _Clock()
    lim = RateLimiter(RateBudget(10, 100), clock=clock, sleep=clock.sleep)
    clock.now = 0.1
    lim.acquire(10)
    clock.now = 0.30000000000000004
    lim.acquire(10)
    assert len(clock.slept) == 1


def test_unadmittable_request():
    with pytest.raises(Unadmittable):
        RateLimiter(RateBudget(10, 1)).admit(11)
