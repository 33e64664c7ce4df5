import numpy as np
import pytest
from fastapi.testclient import TestClient

from flowhedge.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_default_config_cases(client):
    general = client.get("/config/default").json()
    assert general["psi"] == 250.0 and general["eta"] == 5.0
    eta0 = client.get("/config/default", params={"case": "eta0"}).json()
    assert eta0["eta"] == 0.0 and eta0["terminal_kind"] == "linear"
    assert client.get("/config/default", params={"case": "bogus"}).status_code == 422


def test_closed_form_endpoint(client):
    r = client.post("/closed-form", json={"config": {"psi": 0.0}, "t": 0.0, "q": 1.0})
    assert r.status_code == 200
    body = r.json()
    assert body["slope"] == pytest.approx(-4.4732, abs=5e-5)
    assert body["speed"] == pytest.approx(body["slope"] * 1.0)
    assert body["alpha"] == pytest.approx(5000.0)
    assert body["beta"] == pytest.approx(1e-4)


def test_riccati_endpoint(client):
    r = client.post("/riccati/solve", json={"model": "B", "config": {"psi": 0.0}})
    assert r.status_code == 200
    body = r.json()
    assert body["A_entries"][-1] == [500.0, 0.0, 0.0]
    assert len(body["times"]) == len(body["A_entries"]) == len(body["trace_integral"])
    # psi > 0 is outside the quadratic-cost regime
    assert client.post("/riccati/solve", json={"model": "B"}).status_code == 422


def test_riccati_blow_up_maps_to_conflict(client):
    r = client.post(
        "/riccati/solve",
        json={"model": "A", "config": {"psi": 0.0, "gamma": 2e-4}},
    )
    assert r.status_code == 409
    assert "blew up" in r.json()["detail"]


def test_hjb_endpoint_with_surface(client):
    req = {
        "config": {"psi": 0.0},
        "grid": {"Q_max": 20.0, "n_q": 41, "n_t": 20},
        "include_surface": True,
    }
    r = client.post("/hjb/solve", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["policy"]["flavor"] == "speed"
    assert len(body["policy"]["actions"]) == 21
    assert body["surface"]["grid"]["n_q"] == 41
    assert body["policy"]["metadata"]["boundary"] == "neumann"


def test_qvi_endpoint(client):
    req = {
        "config": {"psi": 250.0, "eta": 0.0, "terminal_kind": "linear"},
        "grid": {"Q_max": 20.0, "n_q": 41, "n_t": 20},
    }
    r = client.post("/qvi/solve", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["policy"]["flavor"] == "impulse"
    lo, hi = body["no_trade_interval_t0"]
    assert lo == -hi and hi > 0


def test_evaluate_endpoint_builtin_and_inline(client):
    r = client.post(
        "/evaluate",
        json={"policy": {"builtin": "benchmark"}, "episodes": 20, "seed": 5,
              "include_rewards": True},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["summary"]["n"] == 20
    assert len(body["rewards"]) == 20

    doc = {
        "flavor": "speed",
        "t_grid": [0.0, 1.0],
        "q_grid": [-40.0, 0.0, 40.0],
        "actions": [[100.0, 0.0, -100.0], [100.0, 0.0, -100.0]],
        "metadata": {},
    }
    r2 = client.post(
        "/evaluate",
        json={"policy": {"document": doc}, "episodes": 5, "seed": 5},
    )
    assert r2.status_code == 200
    assert r2.json()["rewards"] is None


def test_evaluate_policy_ref_validation(client):
    r = client.post("/evaluate", json={"policy": {}, "episodes": 5})
    assert r.status_code == 422
    r = client.post(
        "/evaluate",
        json={"policy": {"builtin": "benchmark",
                          "document": {"flavor": "speed", "t_grid": [0], "q_grid": [0, 1],
                                       "actions": [[0, 0]]}},
              "episodes": 5},
    )
    assert r.status_code == 422


def test_compare_endpoint(client):
    rng = np.random.default_rng(0)
    a = rng.normal(0, 1, 200).tolist()
    b = (rng.normal(0, 1, 200) + 2.0).tolist()
    r = client.post("/compare", json={"rewards_a": a, "rewards_b": b})
    body = r.json()
    assert body["significant_5pct"] is True
    assert body["welch"]["p_two_sided"] < 1e-6
    same = client.post("/compare", json={"rewards_a": a, "rewards_b": a}).json()
    assert same["significant_5pct"] is False
    assert same["welch"]["p_two_sided"] == 1.0


def test_state_only_flag_round_trip(client):
    full = client.post(
        "/evaluate",
        json={"policy": {"builtin": "benchmark"}, "episodes": 5, "seed": 1,
              "include_rewards": True},
    ).json()["rewards"]
    reduced = client.post(
        "/evaluate",
        json={"policy": {"builtin": "benchmark"}, "episodes": 5, "seed": 1,
              "include_rewards": True, "include_state_only_reward_terms": False},
    ).json()["rewards"]
    assert all(f != r for f, r in zip(full, reduced))
