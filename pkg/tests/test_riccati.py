from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from flowhedge.closed_form import a_closed, alpha_beta
from flowhedge.params import ParamError, case_params
from flowhedge.riccati import (
    RiccatiBlowUpError,
    RiccatiSolution,
    RiccatiSpec,
    riccati_policy,
    solve_riccati_A,
    solve_riccati_B,
    theta_quadratic,
)


@pytest.fixture(scope="module")
def params():
    return case_params("psi0")


@pytest.fixture(scope="module")
def sol_B(params):
    return solve_riccati_B(RiccatiSpec(model="B", params=params))


def test_spec_validation(params):
    with pytest.raises(ParamError):
        RiccatiSpec(model="C", params=params).validate()
    with pytest.raises(ParamError):
        RiccatiSpec(model="B", params=case_params("general")).validate()  # psi > 0
    lin = replace(params, cost=replace(params.cost, terminal_kind="linear"))
    with pytest.raises(ParamError):
        RiccatiSpec(model="B", params=lin).validate()


def test_terminal_condition_exact(sol_B, params):
    assert np.array_equal(sol_B.A_path[-1], [[params.cost.K_terminal, 0.0], [0.0, 0.0]])


def test_symmetry_along_path(sol_B):
    asym = np.max(np.abs(sol_B.A_path - np.transpose(sol_B.A_path, (0, 2, 1))))
    assert asym < 1e-12


def test_decoupled_entries_match_closed_forms(sol_B, params):
    # off-diagonal stays zero when k = rho = 0
    assert np.max(np.abs(sol_B.A_path[:, 0, 1])) < 1e-10
    # lower-right entry is the beta ODE solution (gamma/2) nu^2 (T - t)
    c_exact = 0.5 * params.risk.gamma * params.market.nu**2 * (params.risk.T - sol_B.times)
    assert np.max(np.abs(sol_B.A_path[:, 1, 1] - c_exact)) < 1e-10
    assert sol_B.A_path[0, 1, 1] == pytest.approx(1e-4, rel=1e-9)
    # upper-left entry matches the scalar closed form
    a_cf = np.array([a_closed(t, params) for t in sol_B.times])
    assert np.max(np.abs(sol_B.A_path[:, 0, 0] - a_cf)) < 1e-6 * params.cost.K_terminal


def test_integrator_convergence(params, sol_B):
    fine = solve_riccati_B(RiccatiSpec(model="B", params=params, n_steps=2 * sol_B.times.size - 2))
    rel = np.max(np.abs(fine.A_path[0] - sol_B.A_path[0])) / np.max(np.abs(sol_B.A_path[0]))
    assert rel < 1e-8


def test_gamma_zero_no_terminal_penalty_is_zero(params):
    p = replace(
        params,
        risk=replace(params.risk, gamma=0.0),
        cost=replace(params.cost, K_terminal=0.0),
    )
    sol = solve_riccati_B(RiccatiSpec(model="B", params=p, n_steps=200))
    assert np.max(np.abs(sol.A_path)) == 0.0


def test_model_A_and_B_coincide_at_gamma_zero(params):
    p = replace(params, risk=replace(params.risk, gamma=0.0))
    a = solve_riccati_A(RiccatiSpec(model="A", params=p, n_steps=2000))
    b = solve_riccati_B(RiccatiSpec(model="B", params=p, n_steps=2000))
    assert np.max(np.abs(a.A_path - b.A_path)) < 1e-10


def test_model_A_small_gamma_completes(params):
    p = replace(params, risk=replace(params.risk, gamma=params.risk.gamma * 1e-3))
    coarse = solve_riccati_A(RiccatiSpec(model="A", params=p, n_steps=2000))
    fine = solve_riccati_A(RiccatiSpec(model="A", params=p, n_steps=4000))
    assert np.all(np.isfinite(coarse.A_path[0]))
    assert np.max(np.abs(fine.A_path[0] - coarse.A_path[0])) < 1e-8 * max(
        1.0, np.max(np.abs(coarse.A_path[0]))
    )


def test_model_A_blow_up_detected(params):
    # empirically located explosive regime: the flow-risk coupling grows with
    # gamma and drives the backward path to infinity before t = 0
    p = replace(params, risk=replace(params.risk, gamma=params.risk.gamma * 100))
    with pytest.raises(RiccatiBlowUpError) as exc:
        solve_riccati_A(RiccatiSpec(model="A", params=p))
    assert 0.0 < exc.value.t_blow < p.risk.T


def test_coarse_step_request_rejected(params):
    with pytest.raises(ParamError, match="n_steps"):
        RiccatiSpec(model="B", params=params, n_steps=50).validate()


# --- policy -----------------------------------------------------------------

def test_policy_zero_at_origin(sol_B):
    assert riccati_policy(sol_B, 0.3, 0.0, 0.0) == 0.0


def test_policy_slope_matches_closed_form(sol_B, params):
    v = riccati_policy(sol_B, 0.0, 1.0, 0.0)
    assert v == pytest.approx(-4.4732, abs=5e-5)
    assert v == pytest.approx(-a_closed(0.0, params) / params.cost.eta, rel=1e-6)


def test_policy_independent_of_price_when_no_impact(sol_B):
    assert riccati_policy(sol_B, 0.5, 2.0, 1e6) == riccati_policy(sol_B, 0.5, 2.0, 0.0)


def test_policy_time_domain(sol_B):
    with pytest.raises(ValueError):
        riccati_policy(sol_B, -0.01, 1.0, 0.0)
    with pytest.raises(ValueError):
        riccati_policy(sol_B, 1.01, 1.0, 0.0)


# --- theta ------------------------------------------------------------------

def test_theta_terminal(sol_B, params):
    K = params.cost.K_terminal
    for q in (-3.0, 0.0, 7.0):
        assert theta_quadratic(sol_B, params.risk.T, q, 123.0) == pytest.approx(
            -K * q * q, abs=1e-9
        )


def test_theta_at_origin_is_minus_trace_integral(sol_B):
    i = len(sol_B.times) // 2
    t = float(sol_B.times[i])
    assert theta_quadratic(sol_B, t, 0.0, 0.0) == pytest.approx(
        -float(sol_B.trace_integral[i]), rel=1e-12
    )
    assert theta_quadratic(sol_B, t, 0.0, 0.0) < 0.0


def test_theta_price_dependence_is_beta(sol_B, params):
    for t in (0.0, 0.4):
        S = 250.0
        diff = theta_quadratic(sol_B, t, 2.0, S) - theta_quadratic(sol_B, t, 2.0, 0.0)
        _, beta = alpha_beta(t, params)
        assert diff == pytest.approx(-beta * S * S, rel=1e-8)


def test_theta_matches_reduced_value_with_exact_constant(sol_B, params):
    # theta(t,q,S) = -a q^2 - int_t^T nu^2 a ds - alpha(t) - beta(t) S^2 when
    # k = rho = 0; the additive constant is pinned, not fitted
    nu2 = params.market.nu**2
    for t in (0.0, 0.5):
        g = quad(lambda s: nu2 * a_closed(s, params), t, params.risk.T)[0]
        alpha, beta = alpha_beta(t, params)
        for q, S in ((0.0, 0.0), (5.0, 100.0), (-12.0, -50.0)):
            expected = -a_closed(t, params) * q * q - g - alpha - beta * S * S
            got = theta_quadratic(sol_B, t, q, S)
            assert got == pytest.approx(expected, rel=1e-6)


def test_theta_solves_pde_with_couplings():
    # finite-difference residual of the dynamic-programming PDE at interior
    # points, exercising k != 0 and rho != 0
    base = case_params("psi0")
    p = replace(base, market=replace(base.market, k=0.3, rho=0.4))
    sol = solve_riccati_B(RiccatiSpec(model="B", params=p, n_steps=4000))
    m, r = p.market, p.risk
    eta = p.cost.eta

    def th(t, q, S):
        return theta_quadratic(sol, t, q, S)

    def residual(t, q, S):
        e, eq, eS = 1e-4, 1e-4, 1e-2
        dt_ = (th(t + e, q, S) - th(t - e, q, S)) / (2 * e)
        dqq = (th(t, q + eq, S) - 2 * th(t, q, S) + th(t, q - eq, S)) / eq**2
        dSS = (th(t, q, S + eS) - 2 * th(t, q, S) + th(t, q, S - eS)) / eS**2
        dqS = (
            th(t, q + eq, S + eS) - th(t, q + eq, S - eS)
            - th(t, q - eq, S + eS) + th(t, q - eq, S - eS)
        ) / (4 * eq * eS)
        dq = (th(t, q + eq, S) - th(t, q - eq, S)) / (2 * eq)
        dS = (th(t, q, S + eS) - th(t, q, S - eS)) / (2 * eS)
        ham = (dq + m.k * dS) ** 2 / (4 * eta)
        return (
            dt_
            + 0.5 * m.sigma**2 * dSS
            + 0.5 * m.nu**2 * dqq
            + m.rho * m.sigma * m.nu * dqS
            - 0.5 * r.gamma * m.sigma**2 * q * q
            - 0.5 * r.gamma * m.nu**2 * S * S
            - r.gamma * m.rho * m.nu * m.sigma * q * S
            - 0.5 * m.nu**2 * m.k
            + m.rho * m.sigma * m.nu
            + ham
        )

    for t, q, S in ((0.5, 3.0, 100.0), (0.3, -7.0, 50.0)):
        scale = abs(th(t, q, S)) + 1.0
        assert abs(residual(t, q, S)) < 1e-3 * scale


# --- serialisation ----------------------------------------------------------

def test_json_round_trip(sol_B, params, tmp_path):
    path = tmp_path / "sol.json"
    sol_B.save(path)
    import json

    doc = json.loads(path.read_text())
    back = RiccatiSolution.from_json_dict(doc, params)
    assert np.array_equal(back.A_path, sol_B.A_path)
    assert np.array_equal(back.times, sol_B.times)
    assert np.array_equal(back.trace_integral, sol_B.trace_integral)
    assert np.array_equal(back.const_drift, sol_B.const_drift)
    assert riccati_policy(back, 0.25, 3.0, 10.0) == riccati_policy(sol_B, 0.25, 3.0, 10.0)
