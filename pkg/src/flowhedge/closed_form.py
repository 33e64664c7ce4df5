"""Closed-form quantities for the quadratic-cost, k = rho = 0 reduction.

a(t) solves the scalar Riccati ODE a' = -(1/2) gamma sigma^2 + a^2/eta with
a(T) = K; the optimal control is v = -(a(t)/eta) q.  alpha and beta are the
price-square reduction terms of the value function ansatz.
"""

from __future__ import annotations

import math

from .params import ModelParams


def a_closed(t, params: ModelParams):
    """Quadratic-form coefficient a(t) of the value function."""
    r = params.risk
    eta = params.cost.eta
    K = params.cost.K_terminal
    if eta <= 0:
        raise ValueError("a(t) requires eta > 0")
    tau = r.T - t
    gs2 = r.gamma * params.market.sigma**2
    if gs2 == 0.0:
        # a' = a^2/eta integrates to the impact-free execution schedule
        return eta * K / (eta + K * tau)
    w = math.sqrt(gs2 * eta / 2.0)  # stationary level of a
    rate = math.sqrt(gs2 / (2.0 * eta))
    th = math.tanh(rate * tau)
    return w * (K + w * th) / (w + K * th)


def control_slope(t, params: ModelParams):
    """Signed feedback gain -a(t)/eta; the optimal speed is slope * q."""
    return -a_closed(t, params) / params.cost.eta


def alpha_beta(t, params: ModelParams) -> tuple[float, float]:
    """Reduction terms alpha(t) = (gamma/4) nu^2 sigma^2 (T-t)^2 and
    beta(t) = (gamma/2) nu^2 (T-t)."""
    m, r = params.market, params.risk
    tau = r.T - t
    alpha = 0.25 * r.gamma * m.nu**2 * m.sigma**2 * tau * tau
    beta = 0.5 * r.gamma * m.nu**2 * tau
    return alpha, beta
