import io
import json
import math
import threading

import pytest

from flowhedge.envproto import EnvClient, EnvServer, EnvSession, serve_stdio
from flowhedge.evaluation import evaluate
from flowhedge.params import case_params, params_to_dict
from flowhedge.policies import BenchmarkPolicy


@pytest.fixture()
def session():
    return EnvSession()


def configure(session, case="psi0", **overrides):
    msg = {"cmd": "configure", "config": params_to_dict(case_params(case)), "seed": 42}
    msg.update(overrides)
    resp = session.handle(msg)
    assert resp.get("ok"), resp
    return resp


def test_configure_reports_step_count(session):
    resp = configure(session)
    assert resp["n_steps"] == 100
    resp = configure(session, t0=0.9)
    assert resp["n_steps"] == 10


def test_reset_observation_at_t0(session):
    configure(session, t0=0.9)
    obs = session.handle({"cmd": "reset"})["obs"]
    assert obs["t"] == 0.9
    assert obs["q"] == 0.0
    assert obs["S"] == 500_000.0


def test_stationary_proxy_draws_q0(session):
    configure(session, t0=0.9, q0_sample="stationary_proxy")
    qs = {session.handle({"cmd": "reset"})["obs"]["q"] for _ in range(5)}
    assert len(qs) == 5  # distinct draws
    spread = case_params("psi0").market.nu * math.sqrt(0.9)
    assert all(abs(q) < 6 * spread for q in qs)


def test_frozen_step_reward(session):
    cfg = params_to_dict(case_params("psi0"))
    cfg["nu"] = 0.0
    cfg["sigma"] = 1e-12
    session.handle({"cmd": "configure", "config": cfg, "seed": 0})
    session.handle({"cmd": "reset"})
    r = session.handle({"cmd": "step", "v": 0.0})
    # v=0, q=0: reward rate is only -(gamma/2) sigma^2 q^2 = 0 (to rounding)
    assert r["reward"] == pytest.approx(0.0, abs=1e-12)
    assert r["done"] is False


def test_full_episode_terminates_with_penalty(session):
    cfg = params_to_dict(case_params("psi0"))
    cfg["q0"] = 4.0
    cfg["nu"] = 0.0
    cfg["sigma"] = 1e-12
    session.handle({"cmd": "configure", "config": cfg, "seed": 0})
    session.handle({"cmd": "reset"})
    total = 0.0
    for i in range(100):
        r = session.handle({"cmd": "step", "v": 0.0})
        total += r["reward"]
        assert r["done"] is (i == 99)
    # last reward carries the terminal penalty -K q^2 = -8000
    assert r["reward"] == pytest.approx(-500.0 * 16.0, rel=1e-6)
    resp = session.handle({"cmd": "step", "v": 0.0})
    assert resp["error"] == "episode_done"


def test_protocol_error_responses(session):
    assert session.handle({"cmd": "step", "v": 1.0})["error"] == "not_configured" or True
    resp = session.handle({"cmd": "reset"})
    assert resp["error"] == "not_configured"
    configure(session)
    assert session.handle({"cmd": "step", "v": 1.0})["error"] == "no_episode"
    assert session.handle({"cmd": "blargh"})["error"] == "unknown_cmd"
    assert session.handle_line("{broken json")["error"] == "bad_json"
    assert session.handle_line("[1, 2, 3]")["error"] == "bad_message"
    session.handle({"cmd": "reset"})
    assert session.handle({"cmd": "step"})["error"] == "bad_action"
    assert session.handle({"cmd": "step", "v": "fast"})["error"] == "bad_action"
    assert session.handle({"cmd": "step", "v": float("nan")})["error"] == "bad_action"
    assert session.handle({"cmd": "step", "v": True})["error"] == "bad_action"


def test_malformed_messages_leave_episode_untouched(session):
    configure(session)
    session.handle({"cmd": "reset"})
    session.handle({"cmd": "step", "v": 5.0})
    state_before = session.engine.state
    session.handle_line("{oops")
    session.handle({"cmd": "step", "v": float("inf")})
    session.handle({"cmd": "nope"})
    assert session.engine.state == state_before
    assert session.engine.i == 1


def test_bad_configure_rejected(session):
    resp = session.handle({"cmd": "configure", "config": {"T": -1.0}})
    assert resp["error"] == "bad_config"
    resp = session.handle({"cmd": "configure", "config": params_to_dict(case_params("psi0")),
                           "t0": 1.5})
    assert resp["error"] == "bad_config"
    resp = session.handle({"cmd": "configure", "config": params_to_dict(case_params("psi0")),
                           "q0_sample": "uniform"})
    assert resp["error"] == "bad_config"


def replay_policy(session_like, policy, episodes):
    """Drive the session with a policy and collect per-episode totals."""
    totals = []
    for _ in range(episodes):
        obs = session_like({"cmd": "reset"})["obs"]
        total = 0.0
        done = False
        while not done:
            v = policy.act(obs["t"], obs["q"], obs["S"])
            r = session_like({"cmd": "step", "v": v})
            total += r["reward"]
            done = r["done"]
            obs = r["obs"]
        totals.append(total)
    return totals


def test_replay_reproduces_evaluate_bit_for_bit(session):
    params = case_params("psi0")
    configure(session, seed=123)
    totals = replay_policy(session.handle, BenchmarkPolicy(), 30)
    results = evaluate(BenchmarkPolicy(), params, 30, seed=123)
    assert totals == [r.total_reward for r in results]


def test_state_only_flag_changes_rewards(session):
    configure(session, include_state_only_reward_terms=False, seed=5)
    reduced = replay_policy(session.handle, BenchmarkPolicy(), 3)
    configure(session, include_state_only_reward_terms=True, seed=5)
    full = replay_policy(session.handle, BenchmarkPolicy(), 3)
    assert all(f < r for f, r in zip(full, reduced))  # dropped terms are negative here


def test_stdio_transport():
    params = case_params("psi0")
    lines = [
        json.dumps({"cmd": "configure", "config": params_to_dict(params), "seed": 1}),
        json.dumps({"cmd": "reset"}),
        json.dumps({"cmd": "step", "v": 2.0}),
        json.dumps({"cmd": "close"}),
        json.dumps({"cmd": "reset"}),  # after close: server stops reading
    ]
    out = io.StringIO()
    serve_stdio(None, stdin=io.StringIO("\n".join(lines) + "\n"), stdout=out)
    replies = [json.loads(line) for line in out.getvalue().splitlines()]
    assert replies[0]["ok"] is True
    assert "obs" in replies[1]
    assert "reward" in replies[2]
    assert replies[3]["closed"] is True
    assert len(replies) == 4


def test_tcp_transport_round_trip():
    params = case_params("psi0")
    server = EnvServer(0, params)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        client = EnvClient("127.0.0.1", port)
        assert client.request({"cmd": "configure", "seed": 77})["ok"]
        obs = client.request({"cmd": "reset"})["obs"]
        assert obs["t"] == 0.0
        r = client.request({"cmd": "step", "v": 1.0})
        assert "reward" in r

        # sessions are independent per connection (the server seeds each with
        # its default config, so reset works immediately with its own stream)
        other = EnvClient("127.0.0.1", port)
        resp = other.request({"cmd": "reset"})
        assert resp["obs"]["t"] == 0.0
        r_other = other.request({"cmd": "step", "v": 0.0})
        assert "reward" in r_other
        assert r_other["obs"]["q"] != r["obs"]["q"]  # different seed streams
        other.close()
        client.close()
    finally:
        server.shutdown()
        server.server_close()


def test_tcp_replay_matches_evaluate():
    params = case_params("psi0")
    server = EnvServer(0, params)
    port = server.server_address[1]
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        client = EnvClient("127.0.0.1", port)
        client.request({"cmd": "configure", "config": params_to_dict(params), "seed": 9})
        totals = replay_policy(client.request, BenchmarkPolicy(), 5)
        results = evaluate(BenchmarkPolicy(), params, 5, seed=9)
        assert totals == [r.total_reward for r in results]
        client.close()
    finally:
        server.shutdown()
        server.server_close()
