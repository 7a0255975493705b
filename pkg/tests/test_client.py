import threading

import pytest

from kgreason.client import ChatClient, ClientConfig
from kgreason.errors import DataError, ProtocolError, TransportError

from llmstub import candidates_body, fixed_reply, stub_server


def _config(url, **kwargs):
    kwargs.setdefault("backoff_base", 0.01)
    return ClientConfig(base_url=url, model_id="stub-model", **kwargs)


def test_echo_single_candidate():
    with stub_server(fixed_reply("<PATH> marry_to </PATH>")) as (url, state):
        client = ChatClient(_config(url))
        out = client.chat([("user", "plan please")])
    assert out == [("<PATH> marry_to </PATH>", None)]
    payload = state.requests[0]["payload"]
    assert payload["model"] == "stub-model"
    assert payload["messages"] == [{"role": "user", "content": "plan please"}]


def test_retry_then_succeed_counts_attempts():
    def behavior(payload, index):
        if index < 2:
            return 500, {"error": "transient"}
        return 200, candidates_body(("ok", None))

    with stub_server(behavior) as (url, state):
        client = ChatClient(_config(url, max_retries=3))
        out = client.chat([("user", "x")])
        assert len(state.requests) == 3
    assert out == [("ok", None)]


def test_exhausted_retries_raise_transport_error_with_attempt_log():
    with stub_server(lambda p, i: (503, {"error": "down"})) as (url, state):
        client = ChatClient(_config(url, max_retries=2))
        with pytest.raises(TransportError) as err:
            client.chat([("user", "x")])
        assert len(state.requests) == 3  # initial try + 2 retries
    assert len(err.value.attempts) == 3
    assert "HTTP 503" in err.value.attempts[0]


def test_429_is_retryable():
    def behavior(payload, index):
        return (429, {"error": "rate"}) if index == 0 else (200, candidates_body(("y", None)))

    with stub_server(behavior) as (url, _):
        assert ChatClient(_config(url)).chat([("user", "x")]) == [("y", None)]


def test_non_retryable_status_is_protocol_error():
    with stub_server(lambda p, i: (400, {"error": "bad request"})) as (url, state):
        with pytest.raises(ProtocolError):
            ChatClient(_config(url, max_retries=3)).chat([("user", "x")])
        assert len(state.requests) == 1


def test_malformed_reply_is_protocol_error_with_body():
    with stub_server(lambda p, i: (200, "not json at all")) as (url, _):
        with pytest.raises(ProtocolError) as err:
            ChatClient(_config(url)).chat([("user", "x")])
    assert err.value.body == "not json at all"

    with stub_server(lambda p, i: (200, {"choices": []})) as (url, _):
        with pytest.raises(ProtocolError):
            ChatClient(_config(url)).chat([("user", "x")])


def test_three_scored_candidates_pass_through_in_order():
    body = candidates_body(("a", -0.1), ("b", -0.7), ("c", -1.2))
    with stub_server(lambda p, i: (200, body)) as (url, state):
        client = ChatClient(_config(url, candidate_count=3))
        out = client.chat([("user", "x")])
        assert state.requests[0]["payload"]["n"] == 3
    assert out == [("a", -0.1), ("b", -0.7), ("c", -1.2)]


def test_n_argument_overrides_candidate_count():
    with stub_server(fixed_reply("z")) as (url, state):
        ChatClient(_config(url, candidate_count=1)).chat([("user", "x")], n=4)
        assert state.requests[0]["payload"]["n"] == 4


def test_empty_messages_rejected():
    with pytest.raises(DataError):
        ChatClient(_config("http://localhost:1")).chat([])


def test_api_key_header_from_named_env_var(monkeypatch):
    monkeypatch.setenv("TEST_STUB_KEY", "sekret")
    with stub_server(fixed_reply("ok")) as (url, state):
        client = ChatClient(_config(url, api_key_env="TEST_STUB_KEY"))
        client.chat([("user", "x")])
        assert state.requests[0]["auth"] == "Bearer sekret"


def test_missing_api_key_sends_no_auth_header(monkeypatch):
    monkeypatch.delenv("KGREASON_API_KEY", raising=False)
    with stub_server(fixed_reply("ok")) as (url, state):
        ChatClient(_config(url)).chat([("user", "x")])
        assert state.requests[0]["auth"] is None


def test_api_key_never_logged(monkeypatch, caplog):
    monkeypatch.setenv("TEST_STUB_KEY", "super-secret-value")
    with caplog.at_level("DEBUG"):
        with stub_server(fixed_reply("ok")) as (url, _):
            ChatClient(_config(url, api_key_env="TEST_STUB_KEY")).chat([("user", "x")])
    assert "super-secret-value" not in caplog.text


def test_url_building_appends_chat_completions():
    with stub_server(fixed_reply("ok")) as (url, state):
        ChatClient(_config(url)).chat([("user", "x")])
        assert state.requests[0]["path"] == "/v1/chat/completions"


def test_response_cache_round_trip(tmp_path):
    calls = []

    def behavior(payload, index):
        calls.append(index)
        return 200, candidates_body(("cached answer", -0.5))

    with stub_server(behavior) as (url, _):
        config = _config(url, cache_dir=str(tmp_path / "cache"))
        client = ChatClient(config)
        first = client.chat([("user", "same prompt")])
        second = client.chat([("user", "same prompt")])
        third = client.chat([("user", "different prompt")])
    assert first == second == [("cached answer", -0.5)]
    assert len(calls) == 2  # second call was served from disk
    assert third == [("cached answer", -0.5)]


def test_cache_survives_client_restart(tmp_path):
    cache = str(tmp_path / "cache")
    with stub_server(fixed_reply("persisted")) as (url, state):
        ChatClient(_config(url, cache_dir=cache)).chat([("user", "x")])
        n_live = len(state.requests)
    # no server at all now; the reply must come from disk
    offline = ChatClient(ClientConfig(
        base_url="http://127.0.0.1:9", model_id="stub-model",
        cache_dir=cache, max_retries=0, backoff_base=0.01))
    assert offline.chat([("user", "x")]) == [("persisted", None)]
    assert n_live == 1


def test_in_flight_limit_enforced():
    active = {"now": 0, "peak": 0}
    lock = threading.Lock()
    release = threading.Event()

    def behavior(payload, index):
        with lock:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        release.wait(timeout=2)
        with lock:
            active["now"] -= 1
        return 200, candidates_body(("ok", None))

    with stub_server(behavior) as (url, _):
        client = ChatClient(_config(url, max_in_flight=2, timeout=10))
        threads = [threading.Thread(target=lambda: client.chat([("user", "x")]))
                   for _ in range(5)]
        for t in threads:
            t.start()
        import time
        time.sleep(0.3)
        release.set()
        for t in threads:
            t.join(timeout=10)
    assert active["peak"] <= 2


def test_config_validation():
    with pytest.raises(DataError):
        ClientConfig(base_url="u", model_id="m", max_retries=-1)
    with pytest.raises(DataError):
        ClientConfig(base_url="u", model_id="m", timeout=0)
    with pytest.raises(DataError):
        ClientConfig(base_url="u", model_id="m", max_in_flight=0)


def test_hanging_endpoint_bounded_by_timeout_and_backoff():
    import time

    def hang(payload, index):
        time.sleep(5)
        return 200, candidates_body(("late", None))

    with stub_server(hang) as (url, _):
        client = ChatClient(_config(url, timeout=0.3, max_retries=1,
                                    backoff_base=0.05))
        started = time.perf_counter()
        with pytest.raises(TransportError):
            client.chat([("user", "x")])
        elapsed = time.perf_counter() - started
    # two attempts of <= 0.3s plus one 0.05s backoff, with slack
    assert elapsed < 2.0
