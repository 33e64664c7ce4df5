"""Episode simulation: Euler-Maruyama dynamics, rewards and PnL accounting.

The same stepping code drives both the Monte Carlo evaluation harness and the
environment service, so totals produced by the two are bit-identical for a
given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .params import CostParams, MarketState, ModelParams

SPEED = "speed"
IMPULSE = "impulse"


def episode_rng(seed: int, episode_index: int) -> np.random.Generator:
    """Independent, reproducible RNG stream for one episode.

    Streams are derived from (seed, episode_index) alone, so episode i sees the
    same shocks no matter how many episodes run, in what order, or on how many
    workers: this is what makes common-random-number comparisons exact.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(episode_index,))
    return np.random.Generator(np.random.PCG64(ss))


def draw_shocks(rng: np.random.Generator, n_steps: int, dt: float, rho: float):
    """Correlated Brownian increments over n_steps.

    dW = sqrt(dt) Z1, dB = sqrt(dt) (rho Z1 + sqrt(1-rho^2) Z2): the standard
    Cholesky factorisation of the 2-D Brownian covariance.
    """
    z = rng.standard_normal((n_steps, 2))
    sqdt = math.sqrt(dt)
    dW = sqdt * z[:, 0]
    dB = sqdt * (rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1])
    return dB, dW


def exec_cost(v, cost: CostParams):
    """Instantaneous execution cost rate L(v) = (psi/2)|v| + eta|v|^(1+phi)."""
    av = abs(v)
    return 0.5 * cost.psi * av + cost.eta * av ** (1.0 + cost.phi)


def terminal_penalty(q, cost: CostParams):
    """Terminal execution cost l(q) per terminal_kind."""
    if cost.terminal_kind == "quadratic":
        return cost.K_terminal * q * q
    if cost.terminal_kind == "linear":
        return 0.5 * cost.psi * abs(q)
    return cost.K_terminal * q * q + 0.5 * cost.psi * abs(q)


def reward_rate(q, S, v, params: ModelParams, include_state_only: bool = True):
    """Running reward rate of the mean-variance objective.

    -L(v) + k v q + rho nu sigma - (gamma/2)(sigma^2 q^2 + nu^2 S^2 + 2 rho sigma nu q S).
    With include_state_only=False the terms that depend on neither v nor q
    (rho nu sigma and -(gamma/2) nu^2 S^2) are dropped; with k = 0 they are an
    additive constant unaffected by the policy.
    """
    m, r = params.market, params.risk
    out = -exec_cost(v, params.cost) + m.k * v * q
    out = out - 0.5 * r.gamma * (m.sigma**2 * q * q + 2.0 * m.rho * m.sigma * m.nu * q * S)
    if include_state_only:
        out = out + m.rho * m.nu * m.sigma - 0.5 * r.gamma * m.nu**2 * S * S
    return out


def running_reward(state: MarketState, v: float, params: ModelParams) -> float:
    """Reward rate at the given state; the per-step reward is this times dt."""
    return reward_rate(state.q, state.S, v, params)


def terminal_reward(q: float, S: float, params: ModelParams) -> float:
    """Terminal objective contribution -(k/2) q^2 - l(q); S does not enter."""
    return -0.5 * params.market.k * q * q - terminal_penalty(q, params.cost)


def step(state: MarketState, v: float, dB: float, dW: float, params: ModelParams) -> MarketState:
    """One Euler-Maruyama step at trading speed v with given shocks."""
    m = params.market
    dt = params.risk.dt
    return MarketState(
        t=state.t + dt,
        q=state.q + v * dt + m.nu * dB,
        S=state.S + m.k * v * dt + m.sigma * dW,
        X=state.X - v * state.S * dt - exec_cost(v, params.cost) * dt,
    )


@dataclass
class Trajectory:
    """Per-step record of one episode (pre-step states and actions)."""

    action_kind: str
    t: list[float] = field(default_factory=list)
    q: list[float] = field(default_factory=list)
    S: list[float] = field(default_factory=list)
    X: list[float] = field(default_factory=list)
    action: list[float] = field(default_factory=list)
    dB: list[float] = field(default_factory=list)
    dW: list[float] = field(default_factory=list)
    final_state: Optional[MarketState] = None


@dataclass
class EpisodeResult:
    """Accumulated objective and the two PnL computations for one episode."""

    total_reward: float
    pnl_cash: float
    pnl_ito: float
    trajectory: Optional[Trajectory] = None


class EpisodeEngine:
    """Drives one episode step by step.

    Used directly by the environment service (actions arrive over the wire)
    and by the evaluation loop (actions come from a Policy); both therefore
    perform identical floating-point work.

    action_kind selects how actions are interpreted: trading speeds (lot/day)
    or impulses (lot, executed instantly at spread cost; requires eta = 0 and
    k = 0, the regime where block trades are meaningful).
    """

    def __init__(
        self,
        params: ModelParams,
        shocks: tuple[np.ndarray, np.ndarray],
        t0: float = 0.0,
        q0: Optional[float] = None,
        action_kind: str = SPEED,
        include_state_only: bool = True,
        record: bool = False,
    ):
        if action_kind not in (SPEED, IMPULSE):
            raise ValueError(f"unknown action kind {action_kind!r}")
        if action_kind == IMPULSE and (params.cost.eta != 0 or params.market.k != 0):
            raise ValueError("impulse episodes require eta = 0 and k = 0")
        self.params = params
        self.dB, self.dW = shocks
        self.n_steps = len(self.dB)
        self.include_state_only = include_state_only
        self.action_kind = action_kind
        m = params.market
        self.state = MarketState(t=t0, q=m.q0 if q0 is None else q0, S=m.S0, X=m.X0)
        self.q_start = self.state.q
        self.i = 0
        self.total_reward = 0.0
        self._ito_run = 0.0  # running integrand of the Ito expansion
        self._stoch = 0.0  # nu S dB + sigma q dW martingale sums
        self.trajectory = Trajectory(action_kind=action_kind) if record else None

    @property
    def done(self) -> bool:
        return self.i >= self.n_steps

    def step(self, action: float) -> tuple[float, bool]:
        """Advance one step; returns (reward, done).

        The final step's reward includes the terminal penalty.
        """
        if self.done:
            raise RuntimeError("episode is already done")
        params = self.params
        m = params.market
        dt = params.risk.dt
        s = self.state
        dB = float(self.dB[self.i])
        dW = float(self.dW[self.i])
        rns = m.rho * m.nu * m.sigma

        if self.action_kind == SPEED:
            v = action
            reward = reward_rate(s.q, s.S, v, params, self.include_state_only) * dt
            self._ito_run += (-exec_cost(v, params.cost) + m.k * v * s.q + rns) * dt
            self._stoch += m.nu * s.S * dB + m.sigma * s.q * dW
            if self.trajectory is not None:
                self._record(s, v, dB, dW)
            self.state = step(s, v, dB, dW, params)
        else:
            xi = action
            spread_cost = 0.5 * params.cost.psi * abs(xi)
            q_post = s.q + xi
            reward = -spread_cost + reward_rate(q_post, s.S, 0.0, params, self.include_state_only) * dt
            self._ito_run += -spread_cost + rns * dt
            self._stoch += m.nu * s.S * dB + m.sigma * q_post * dW
            if self.trajectory is not None:
                self._record(s, xi, dB, dW)
            self.state = MarketState(
                t=s.t + dt,
                q=q_post + m.nu * dB,
                S=s.S + m.sigma * dW,
                X=s.X - xi * s.S - spread_cost,
            )

        self.i += 1
        if self.done:
            reward += terminal_reward(self.state.q, self.state.S, params)
            if self.trajectory is not None:
                self.trajectory.final_state = self.state
        self.total_reward += reward
        return reward, self.done

    def _record(self, s: MarketState, action: float, dB: float, dW: float) -> None:
        tr = self.trajectory
        tr.t.append(s.t)
        tr.q.append(s.q)
        tr.S.append(s.S)
        tr.X.append(s.X)
        tr.action.append(action)
        tr.dB.append(dB)
        tr.dW.append(dW)

    def result(self) -> EpisodeResult:
        if not self.done:
            raise RuntimeError("episode still running")
        m = self.params.market
        s = self.state
        term = terminal_reward(s.q, s.S, self.params)
        pnl_cash = s.X + s.q * s.S + term
        pnl_ito = m.X0 + self.q_start * m.S0 + self._ito_run + self._stoch + term
        return EpisodeResult(
            total_reward=self.total_reward,
            pnl_cash=pnl_cash,
            pnl_ito=pnl_ito,
            trajectory=self.trajectory,
        )


def pnl_both_ways(trajectory: Trajectory, params: ModelParams) -> tuple[float, float]:
    """PnL from the terminal state and from the discretised Ito expansion.

    The cash route is X_T + q_T S_T - (k/2) q_T^2 - l(q_T); the Ito route
    accumulates the running integrand and the two stochastic sums with
    pre-step (left-point) states.
    """
    if trajectory.final_state is None:
        raise ValueError("trajectory is incomplete: no final state recorded")
    n = len(trajectory.t)
    for name in ("q", "S", "X", "action", "dB", "dW"):
        if len(getattr(trajectory, name)) != n:
            raise ValueError(f"trajectory is incomplete: field {name!r} has wrong length")
    m = params.market
    s = trajectory.final_state
    term = terminal_reward(s.q, s.S, params)
    pnl_cash = s.X + s.q * s.S + term

    dt = params.risk.dt
    rns = m.rho * m.nu * m.sigma
    running = 0.0
    stoch = 0.0
    if trajectory.action_kind == SPEED:
        for q, S, v, dB, dW in zip(
            trajectory.q, trajectory.S, trajectory.action, trajectory.dB, trajectory.dW
        ):
            running += (-exec_cost(v, params.cost) + m.k * v * q + rns) * dt
            stoch += m.nu * S * dB + m.sigma * q * dW
    else:
        for q, S, xi, dB, dW in zip(
            trajectory.q, trajectory.S, trajectory.action, trajectory.dB, trajectory.dW
        ):
            running += -0.5 * params.cost.psi * abs(xi) + rns * dt
            stoch += m.nu * S * dB + m.sigma * (q + xi) * dW
    q_start = trajectory.q[0] if n else m.q0
    pnl_ito = m.X0 + q_start * m.S0 + running + stoch + term
    return pnl_cash, pnl_ito
