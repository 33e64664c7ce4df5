"""Impulse-control solver for the pure spread-cost regime (eta = 0).

With only bid-ask costs the trader acts through block trades, and the value
function solves a quasi-variational inequality: at each point either the
diffusion-with-risk-penalty PDE holds, or an immediate trade to some target
inventory is at least as good,

    0 = max( d_t th + (1/2) nu^2 d_qq th - (gamma/2) sigma^2 q^2,
             max_xi th(t, q + xi) - th(t, q) - (psi/2)|xi| ),

with terminal value th(T,q) = -(psi/2)|q|.  The scheme splits each backward
step into an implicit diffusion solve followed by intervention sweeps whose
targets are restricted to grid nodes; the sweep operator is idempotent (the
spread cost is additive along the line), so it reaches its fixed point fast.
The Neumann boundary d_q th = -+ psi/2 is exact here: far-out inventory is
hedged back at spread cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .hjb import GridSpec
from .params import ModelParams, ParamError

IMPROVE_TOL = 1e-10
MAX_SWEEPS = 100


class QviError(RuntimeError):
    pass


@dataclass
class QviSurface:
    """Value grid plus the intervention structure (no-trade mask and targets).

    impulse_target[i, j] is the post-trade inventory at node (t_i, q_j); it
    equals q_j wherever no trade improves the value.
    """

    grid: GridSpec
    t_grid: np.ndarray
    q_grid: np.ndarray
    theta: np.ndarray
    no_trade_mask: np.ndarray
    impulse_target: np.ndarray

    def no_trade_interval(self, t_index: int) -> tuple[float, float]:
        """Contiguous no-trade interval around q = 0 at one time row."""
        mask = self.no_trade_mask[t_index]
        center = len(self.q_grid) // 2
        if not mask[center]:
            return 0.0, 0.0
        lo = center
        while lo > 0 and mask[lo - 1]:
            lo -= 1
        hi = center
        while hi < len(mask) - 1 and mask[hi + 1]:
            hi += 1
        return float(self.q_grid[lo]), float(self.q_grid[hi])

    def to_policy_doc(self, metadata: Optional[dict] = None) -> dict:
        return {
            "flavor": "impulse",
            "t_grid": self.t_grid.tolist(),
            "q_grid": self.q_grid.tolist(),
            "actions": self.impulse_target.tolist(),
            "metadata": metadata or {},
        }


def _intervene(theta_row: np.ndarray, q: np.ndarray, psi: float):
    """One full intervention sweep: for each node the best grid-target trade.

    Ties within 1e-12 prefer the smallest trade, then the smallest target
    magnitude, keeping targets odd for symmetric data.
    """
    cost = 0.5 * psi * np.abs(q[None, :] - q[:, None])
    scores = theta_row[None, :] - cost
    best = scores.max(axis=1)
    cand = scores >= best[:, None] - 1e-12
    trade = np.abs(q[None, :] - q[:, None])
    pref = np.where(cand, trade + 1e-9 * np.abs(q)[None, :], np.inf)
    target_idx = np.argmin(pref, axis=1)
    new = scores[np.arange(len(q)), target_idx]
    return new, target_idx


def solve_qvi(params: ModelParams, grid: GridSpec | None = None) -> QviSurface:
    """Backward induction with operator splitting (diffusion then intervention)."""
    params.validate()
    cost = params.cost
    if cost.eta != 0:
        raise ParamError("the QVI solver is the eta = 0 regime (use the PDE solver otherwise)")
    if cost.psi <= 0:
        raise ParamError("the QVI solver requires psi > 0")
    if cost.terminal_kind != "linear":
        raise ParamError("the QVI formulation uses the linear terminal penalty (psi/2)|q|")
    if params.market.k != 0 or params.market.rho != 0:
        raise ParamError("the 1-D reduction requires k = 0 and rho = 0")
    grid = (grid or GridSpec()).validate()
    m, r = params.market, params.risk
    q = grid.q_grid()
    t_grid = grid.t_grid(r.T)
    dq = q[1] - q[0]
    dt = r.T / grid.n_t
    psi = cost.psi
    n_q = grid.n_q

    nu2 = m.nu**2
    diff = 0.5 * nu2 * dt / dq**2
    source = -0.5 * r.gamma * m.sigma**2 * q * q

    # constant tridiagonal operator: implicit diffusion with Neumann ghosts
    ab = np.zeros((3, n_q))
    ab[1, :] = 1.0 + 2.0 * diff
    ab[0, 2:] = -diff
    ab[2, :-2] = -diff
    ab[0, 1] = -2.0 * diff
    ab[2, -2] = -2.0 * diff

    theta = np.empty((grid.n_t + 1, n_q))
    mask = np.ones((grid.n_t + 1, n_q), dtype=bool)
    targets = np.tile(q, (grid.n_t + 1, 1))
    theta[grid.n_t] = -0.5 * psi * np.abs(q)

    for n in range(grid.n_t - 1, -1, -1):
        rhs = theta[n + 1] + dt * source
        rhs[0] -= 0.5 * nu2 * dt * psi / dq
        rhs[-1] -= 0.5 * nu2 * dt * psi / dq
        row = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(row)):
            raise QviError(f"non-finite values at time step {n}")

        # the sweep operator is idempotent (costs are additive along the line),
        # so the first application against the diffusion output both reaches
        # the fixed point and carries the true argmax targets; extra sweeps
        # compose targets and only fire on degenerate data
        new, target_idx = _intervene(row, q, psi)
        for _ in range(MAX_SWEEPS):
            nxt, idx2 = _intervene(new, q, psi)
            if np.max(nxt - new) <= IMPROVE_TOL:
                break
            new = nxt
            target_idx = idx2[target_idx]
        else:
            raise QviError(f"intervention sweep did not converge at time step {n}")

        improved = new - row > IMPROVE_TOL
        theta[n] = np.where(improved, new, row)
        mask[n] = ~improved
        targets[n] = np.where(improved, q[target_idx], q)

    return QviSurface(
        grid=grid,
        t_grid=t_grid,
        q_grid=q,
        theta=theta,
        no_trade_mask=mask,
        impulse_target=targets,
    )


def qvi_policy(surface: QviSurface, t: float, q: float) -> float:
    """Impulse xi at (t, q): zero inside the no-trade region, otherwise the
    blended grid target minus q.  Time lookup uses the node at or before t."""
    T = surface.t_grid[-1]
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    n_t = len(surface.t_grid) - 1
    i = min(int(t / T * n_t), n_t - 1) if t < T else n_t

    qs = surface.q_grid
    if q <= qs[0]:
        return float(surface.impulse_target[i, 0] - q)
    if q >= qs[-1]:
        return float(surface.impulse_target[i, -1] - q)
    j = int(np.searchsorted(qs, q)) - 1
    w = (q - qs[j]) / (qs[j + 1] - qs[j])
    if surface.no_trade_mask[i, j] and surface.no_trade_mask[i, j + 1]:
        return 0.0
    target = (1.0 - w) * surface.impulse_target[i, j] + w * surface.impulse_target[i, j + 1]
    return float(target - q)
