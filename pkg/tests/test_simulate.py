from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowhedge.params import CostParams, MarketState, case_params, default_params
from flowhedge.simulate import (
    EpisodeEngine,
    draw_shocks,
    episode_rng,
    exec_cost,
    pnl_both_ways,
    reward_rate,
    running_reward,
    step,
    terminal_penalty,
    terminal_reward,
)


def engine_for(params, seed=0, episode=0, record=True, n_steps=None, kind="speed"):
    rng = episode_rng(seed, episode)
    n = n_steps if n_steps is not None else params.risk.n_steps
    shocks = draw_shocks(rng, n, params.risk.dt, params.market.rho)
    return EpisodeEngine(params, shocks, action_kind=kind, record=record)


# --- exec_cost -------------------------------------------------------------

def test_exec_cost_zero_at_zero():
    assert exec_cost(0.0, CostParams()) == 0.0


def test_exec_cost_example():
    cost = CostParams(psi=250.0, eta=5.0, phi=1.0)
    assert exec_cost(10.0, cost) == pytest.approx(1750.0, rel=1e-14)
    assert exec_cost(-10.0, cost) == pytest.approx(1750.0, rel=1e-14)


def test_exec_cost_quadrature_of_marginal_cost():
    # independent route: L(v) = int_0^v L'(u) du for v > 0
    cost = CostParams(psi=250.0, eta=5.0, phi=1.0)
    v = 10.0
    u = np.linspace(0.0, v, 200_001)
    marginal = 0.5 * cost.psi + cost.eta * (1 + cost.phi) * u**cost.phi
    assert np.trapezoid(marginal, u) == pytest.approx(exec_cost(v, cost), rel=1e-9)


@given(v=st.floats(-1e4, 1e4), phi=st.floats(0.25, 3.0))
@settings(max_examples=60, deadline=None)
def test_exec_cost_even_and_nonnegative(v, phi):
    cost = CostParams(psi=250.0, eta=5.0, phi=phi)
    assert exec_cost(v, cost) == exec_cost(-v, cost)
    assert exec_cost(v, cost) >= 0.0


def test_exec_cost_convex_on_grid():
    cost = CostParams(psi=250.0, eta=5.0, phi=1.5)
    v = np.linspace(-50, 50, 501)
    L = exec_cost(v, cost)
    second = L[:-2] - 2 * L[1:-1] + L[2:]
    assert np.all(second >= -1e-9)


# --- step ------------------------------------------------------------------

def test_step_frozen_dynamics():
    p = replace(
        default_params(),
        market=replace(default_params().market, nu=0.0),
    )
    s = MarketState(t=0.0, q=3.0, S=500_000.0, X=100.0)
    s2 = step(s, 0.0, 0.0, 0.0, p)
    assert (s2.q, s2.S, s2.X) == (s.q, s.S, s.X)
    assert s2.t == pytest.approx(p.risk.dt)


def test_step_hand_evaluated():
    p = case_params("general")  # psi=250, eta=5, phi=1
    p = replace(p, market=replace(p.market, nu=0.0, k=0.0))
    s = MarketState(t=0.0, q=2.0, S=500_000.0, X=0.0)
    s2 = step(s, 1.0, 0.0, 0.0, p)
    dt = p.risk.dt
    assert s2.q == pytest.approx(2.0 + dt)
    assert s2.S == 500_000.0
    # X loses v*S*dt plus cost L(1) = 125 + 5 per day
    assert s2.X == pytest.approx(-(1.0 * 500_000.0 * dt) - 130.0 * dt, rel=1e-14)


def test_zero_speed_inventory_telescopes():
    p = default_params()
    rng = episode_rng(123, 0)
    dB, dW = draw_shocks(rng, 100, p.risk.dt, p.market.rho)
    s = MarketState(t=0.0, q=0.0, S=p.market.S0, X=0.0)
    for i in range(100):
        s = step(s, 0.0, float(dB[i]), float(dW[i]), p)
    assert s.q == pytest.approx(p.market.nu * dB.sum(), rel=1e-12)


# --- rewards ---------------------------------------------------------------

def test_running_reward_flow_risk_only():
    p = default_params()
    s = MarketState(t=0.0, q=0.0, S=p.market.S0, X=0.0)
    expected = -0.5 * p.risk.gamma * p.market.nu**2 * p.market.S0**2
    assert running_reward(s, 0.0, p) == pytest.approx(expected, rel=1e-14)


def test_running_reward_paper_parameters():
    p = default_params()
    s = MarketState(t=0.0, q=10.0, S=500_000.0, X=0.0)
    # -(gamma/2)(sigma^2 q^2 + nu^2 S^2) = -(1e-6)(1e10 + 2.5e13)
    assert running_reward(s, 0.0, p) == pytest.approx(-25_010_000.0, rel=1e-12)


@given(q=st.floats(-40, 40), v=st.floats(-200, 200))
@settings(max_examples=50, deadline=None)
def test_running_reward_even_when_uncoupled(q, v):
    p = default_params()  # rho = 0, k = 0
    s = MarketState(t=0.0, q=q, S=p.market.S0, X=0.0)
    s_neg = MarketState(t=0.0, q=-q, S=p.market.S0, X=0.0)
    assert running_reward(s, v, p) == running_reward(s, -v, p)
    assert running_reward(s, v, p) == running_reward(s_neg, v, p)


def test_reward_rate_state_only_terms():
    p = default_params()
    full = reward_rate(3.0, 500_000.0, 5.0, p, include_state_only=True)
    reduced = reward_rate(3.0, 500_000.0, 5.0, p, include_state_only=False)
    dropped = p.market.rho * p.market.nu * p.market.sigma - 0.5 * p.risk.gamma * (
        p.market.nu**2 * 500_000.0**2
    )
    assert full - reduced == pytest.approx(dropped, rel=1e-12)


def test_terminal_reward_examples():
    p = default_params()
    assert terminal_reward(0.0, 123.0, p) == 0.0
    assert terminal_reward(10.0, 0.0, p) == pytest.approx(-50_000.0)
    lin = replace(p, cost=replace(p.cost, terminal_kind="linear"))
    assert terminal_reward(-4.0, 0.0, lin) == pytest.approx(-500.0)
    both = replace(p, cost=replace(p.cost, terminal_kind="sum"))
    assert terminal_penalty(-4.0, both.cost) == pytest.approx(500.0 * 16 + 500.0)


# --- PnL both ways ----------------------------------------------------------

def test_pnl_zero_noise_zero_trading():
    p = default_params()
    p = replace(p, market=replace(p.market, nu=0.0, q0=5.0, X0=1000.0))
    eng = engine_for(p)
    eng.dB[:] = 0.0
    eng.dW[:] = 0.0
    while not eng.done:
        eng.step(0.0)
    r = eng.result()
    expected = 1000.0 + 5.0 * p.market.S0 - terminal_penalty(5.0, p.cost)
    assert r.pnl_cash == pytest.approx(expected, rel=1e-12)
    assert r.pnl_ito == pytest.approx(expected, rel=1e-12)


def test_pnl_hand_computed_ten_steps():
    p = replace(default_params(), risk=replace(default_params().risk, T=0.1, dt=0.01))
    eng = engine_for(p, seed=7, episode=3)
    while not eng.done:
        eng.step(1.0)
    res = eng.result()

    # spreadsheet-style independent recomputation
    m, c, r = p.market, p.cost, p.risk
    q, S, X = m.q0, m.S0, m.X0
    running = 0.0
    stoch = 0.0
    for i in range(10):
        dB, dW = float(eng.dB[i]), float(eng.dW[i])
        L = 0.5 * c.psi * 1.0 + c.eta * 1.0
        running += (-L + m.k * 1.0 * q + m.rho * m.nu * m.sigma) * r.dt
        stoch += m.nu * S * dB + m.sigma * q * dW
        X = X - 1.0 * S * r.dt - L * r.dt
        q = q + 1.0 * r.dt + m.nu * dB
        S = S + m.k * 1.0 * r.dt + m.sigma * dW
    term = -0.5 * m.k * q * q - terminal_penalty(q, c)
    assert res.pnl_cash == pytest.approx(X + q * S + term, rel=1e-12)
    assert res.pnl_ito == pytest.approx(m.X0 + m.q0 * m.S0 + running + stoch + term, rel=1e-12)

    # and pnl_both_ways on the recorded trajectory agrees with the engine
    cash, ito = pnl_both_ways(res.trajectory, p)
    assert cash == res.pnl_cash
    assert ito == res.pnl_ito


def _mean_gap(params, n_episodes, speed):
    total = 0.0
    for i in range(n_episodes):
        eng = engine_for(params, seed=99, episode=i, record=False)
        while not eng.done:
            s = eng.state
            eng.step(speed * (1.0 if s.q < 0 else -1.0) if s.q != 0 else 0.0)
        r = eng.result()
        total += abs(r.pnl_cash - r.pnl_ito)
    return total / n_episodes


def test_pnl_gap_halves_with_dt_price_noise_only():
    # nu = 0: the Ito-vs-cash gap is pure O(dt) discretisation error
    base = default_params()
    gaps = []
    for dt in (0.01, 0.005):
        p = replace(
            base,
            market=replace(base.market, nu=0.0, q0=10.0),
            risk=replace(base.risk, dt=dt),
        )
        gaps.append(_mean_gap(p, 300, speed=50.0))
    ratio = gaps[1] / gaps[0]
    assert 0.4 <= ratio <= 0.6


def test_pnl_gap_shrinks_with_dt_full_model():
    # with nu, sigma > 0 the realized-covariation term makes the gap O(sqrt(dt));
    # it must shrink, but exact halving is not attainable
    base = default_params()
    gaps = []
    for dt in (0.01, 0.005):
        p = replace(base, risk=replace(base.risk, dt=dt))
        gaps.append(_mean_gap(p, 300, speed=50.0))
    ratio = gaps[1] / gaps[0]
    assert ratio < 0.85


def test_incomplete_trajectory_rejected():
    p = default_params()
    eng = engine_for(p)
    eng.step(1.0)
    with pytest.raises(ValueError, match="incomplete"):
        pnl_both_ways(eng.trajectory, p)


# --- determinism and streams -------------------------------------------------

def test_identical_seed_identical_trajectory():
    p = default_params()
    runs = []
    for _ in range(2):
        eng = engine_for(p, seed=5, episode=17)
        while not eng.done:
            eng.step(3.0)
        runs.append(eng.result())
    assert runs[0].pnl_cash == runs[1].pnl_cash
    assert runs[0].total_reward == runs[1].total_reward
    assert runs[0].trajectory.q == runs[1].trajectory.q


def test_episode_streams_are_independent_of_count():
    a = episode_rng(1, 5).standard_normal(4)
    b = episode_rng(1, 5).standard_normal(4)
    assert np.array_equal(a, b)
    c = episode_rng(1, 6).standard_normal(4)
    assert not np.array_equal(a, c)


def test_shock_correlation_construction():
    rng = episode_rng(0, 0)
    dB, dW = draw_shocks(rng, 200_000, 0.01, rho=0.6)
    corr = np.corrcoef(dB, dW)[0, 1]
    assert corr == pytest.approx(0.6, abs=0.01)
    assert dB.std() == pytest.approx(0.1, abs=0.002)


def test_no_flow_no_trade_constant_inventory():
    p = replace(default_params(), market=replace(default_params().market, nu=0.0, q0=7.0))
    eng = engine_for(p)
    while not eng.done:
        eng.step(0.0)
    assert all(q == 7.0 for q in eng.trajectory.q)
    assert eng.state.q == 7.0
