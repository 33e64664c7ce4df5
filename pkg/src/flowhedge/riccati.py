"""Backward matrix Riccati solvers for the quadratic-cost benchmark case.

Both objective variants lead to a terminal-value problem for a symmetric 2x2
matrix path A(t) with A(T) = [[K, 0], [0, 0]]:

  exponential-utility variant (model A):  A' = A U A + A Y + Y^T A + Q
  mean-variance variant (model B):        A' = (1/eta) A [[1,k],[k,k^2]] A - (gamma/2) Sigma

Model A can explode in finite time, so the integrator watches for blow-up.
The value reconstruction is

  theta(t,q,S) = -(q,S) A(t) (q,S)^T - int_t^T Tr(J Sigma J A(s)) ds
                 - ((1/2) nu^2 k - rho sigma nu) (T - t),

which satisfies the dynamic-programming PDE (checked by substitution); note
the two constant terms carry a minus sign, verified independently against the
k = rho = 0 reduction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ModelParams, ParamError

DEFAULT_BLOWUP_NORM = 1e12


class RiccatiBlowUpError(RuntimeError):
    """Finite-time explosion of the model-A Riccati path."""

    def __init__(self, t_blow: float, norm: float):
        super().__init__(
            f"Riccati solution blew up at t={t_blow:.6g} (max|A| = {norm:.3g}); "
            "shorten T or reduce gamma"
        )
        self.t_blow = t_blow
        self.norm = norm


@dataclass(frozen=True)
class RiccatiSpec:
    """Inputs of a Riccati solve: model variant, parameters, step count."""

    model: str  # "A" | "B"
    params: ModelParams
    n_steps: int = 0  # 0 -> 10 * (T/dt)
    blowup_norm: float = DEFAULT_BLOWUP_NORM

    def validate(self) -> "RiccatiSpec":
        if self.model not in ("A", "B"):
            raise ParamError(f"model must be 'A' or 'B', got {self.model!r}")
        self.params.validate()
        cost = self.params.cost
        if cost.eta <= 0:
            raise ParamError("Riccati case requires eta > 0")
        if cost.psi != 0:
            raise ParamError("Riccati case requires psi = 0 (pure quadratic costs)")
        if cost.phi != 1:
            raise ParamError("Riccati case requires phi = 1 (L = eta v^2)")
        if cost.terminal_kind != "quadratic":
            raise ParamError("Riccati case requires a quadratic terminal penalty")
        if self.n_steps < 0:
            raise ParamError("n_steps must be >= 0")
        if self.n_steps > 0 and self.n_steps < self.min_steps:
            raise ParamError(
                f"n_steps={self.n_steps} cannot resolve the terminal curvature layer "
                f"(rate 2K/eta); need at least {self.min_steps}"
            )
        return self

    @property
    def min_steps(self) -> int:
        # RK4 needs h * (2K/eta) well inside its stability region; the terminal
        # value A(T) = [[K, 0], [0, 0]] relaxes at that rate
        rate = 2.0 * self.params.cost.K_terminal / self.params.cost.eta
        return max(1, int(np.ceil(2.0 * rate * self.params.risk.T)))

    @property
    def steps(self) -> int:
        if self.n_steps > 0:
            return self.n_steps
        return max(10 * self.params.risk.n_steps, self.min_steps)


@dataclass
class RiccatiSolution:
    """Time-sampled A(t) path plus the value-reconstruction terms.

    times is ascending 0..T (the integration runs backward from T).
    trace_integral[i] = int_{times[i]}^T Tr(J Sigma J A(s)) ds and
    const_drift[i] = ((1/2) nu^2 k - rho sigma nu) (T - times[i]).
    """

    model: str
    params: ModelParams
    times: np.ndarray
    A_path: np.ndarray  # (n+1, 2, 2)
    trace_integral: np.ndarray
    const_drift: np.ndarray

    def A_at(self, t: float) -> np.ndarray:
        """Linear-in-time interpolation of A."""
        i, w = self._locate(t)
        return (1.0 - w) * self.A_path[i] + w * self.A_path[i + 1]

    def _locate(self, t: float) -> tuple[int, float]:
        T = self.params.risk.T
        if not 0.0 <= t <= T:
            raise ValueError(f"t={t} outside [0, {T}]")
        n = len(self.times) - 1
        x = t / T * n
        i = min(int(x), n - 1)
        return i, x - i

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "times": self.times.tolist(),
            "A_entries": [[a[0, 0], a[0, 1], a[1, 1]] for a in self.A_path],
            "trace_integral": self.trace_integral.tolist(),
            "const_drift": self.const_drift.tolist(),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc: dict, params: ModelParams) -> "RiccatiSolution":
        entries = np.asarray(doc["A_entries"], dtype=float)
        A_path = np.empty((len(entries), 2, 2))
        A_path[:, 0, 0] = entries[:, 0]
        A_path[:, 0, 1] = entries[:, 1]
        A_path[:, 1, 0] = entries[:, 1]
        A_path[:, 1, 1] = entries[:, 2]
        return cls(
            model=doc["model"],
            params=params,
            times=np.asarray(doc["times"], dtype=float),
            A_path=A_path,
            trace_integral=np.asarray(doc["trace_integral"], dtype=float),
            const_drift=np.asarray(doc["const_drift"], dtype=float),
        )


def _matrices(params: ModelParams):
    m = params.market
    sigma_mat = np.array(
        [
            [m.sigma**2, m.rho * m.sigma * m.nu],
            [m.rho * m.sigma * m.nu, m.nu**2],
        ]
    )
    J = np.array([[0.0, 1.0], [1.0, 0.0]])
    impact = np.array([[1.0, m.k], [m.k, m.k**2]])
    return sigma_mat, J, impact


def _integrate(spec: RiccatiSpec, deriv) -> RiccatiSolution:
    """RK4 backward march from A(T) = [[K,0],[0,0]] with the trace integral
    carried as an extra quadrature state."""
    params = spec.params
    m, r = params.market, params.risk
    sigma_mat, J, _ = _matrices(params)
    JSJ = J @ sigma_mat @ J
    n = spec.steps
    h = r.T / n

    A = np.array([[params.cost.K_terminal, 0.0], [0.0, 0.0]])
    I = 0.0
    A_rev = [A.copy()]
    I_rev = [0.0]
    t = r.T
    for i in range(n):
        k1a = deriv(A)
        k1i = -np.trace(JSJ @ A)
        A2 = A - 0.5 * h * k1a
        k2a = deriv(A2)
        k2i = -np.trace(JSJ @ A2)
        A3 = A - 0.5 * h * k2a
        k3a = deriv(A3)
        k3i = -np.trace(JSJ @ A3)
        A4 = A - h * k3a
        k4a = deriv(A4)
        k4i = -np.trace(JSJ @ A4)
        A = A - (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        A = 0.5 * (A + A.T)  # suppress rounding-driven asymmetry
        I = I - (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
        t -= h
        norm = float(np.max(np.abs(A)))
        if not np.isfinite(norm) or norm > spec.blowup_norm:
            raise RiccatiBlowUpError(t_blow=t, norm=norm)
        A_rev.append(A.copy())
        I_rev.append(I)

    times = np.linspace(0.0, r.T, n + 1)
    A_path = np.array(A_rev[::-1])
    trace_integral = np.array(I_rev[::-1])
    drift_rate = 0.5 * m.nu**2 * m.k - m.rho * m.sigma * m.nu
    const_drift = drift_rate * (r.T - times)
    return RiccatiSolution(
        model=spec.model,
        params=params,
        times=times,
        A_path=A_path,
        trace_integral=trace_integral,
        const_drift=const_drift,
    )


def solve_riccati_B(spec: RiccatiSpec) -> RiccatiSolution:
    """Mean-variance variant; global existence on [0, T] is guaranteed."""
    spec = spec.validate()
    if spec.model != "B":
        raise ParamError("solve_riccati_B requires spec.model == 'B'")
    params = spec.params
    sigma_mat, _, impact = _matrices(params)
    eta = params.cost.eta
    gamma = params.risk.gamma

    def deriv(A):
        return (A @ impact @ A) / eta - 0.5 * gamma * sigma_mat

    return _integrate(spec, deriv)


def solve_riccati_A(spec: RiccatiSpec) -> RiccatiSolution:
    """Exponential-utility variant; may blow up in finite time."""
    spec = spec.validate()
    if spec.model != "A":
        raise ParamError("solve_riccati_A requires spec.model == 'A'")
    params = spec.params
    sigma_mat, J, impact = _matrices(params)
    eta = params.cost.eta
    gamma = params.risk.gamma
    k = params.market.k
    shear = np.array([[1.0, 0.0], [-k, 1.0]])
    U = impact / eta - 2.0 * gamma * (J @ sigma_mat @ J)
    Y = gamma * (J @ sigma_mat @ shear)
    Q = -0.5 * gamma * (shear.T @ sigma_mat @ shear)

    def deriv(A):
        return A @ U @ A + A @ Y + Y.T @ A + Q

    return _integrate(spec, deriv)


def solve_riccati(spec: RiccatiSpec) -> RiccatiSolution:
    return solve_riccati_A(spec) if spec.model == "A" else solve_riccati_B(spec)


def riccati_policy(sol: RiccatiSolution, t: float, q: float, S: float) -> float:
    """Linear feedback v = -(1/eta) (1, k) A(t) (q, S)^T."""
    A = sol.A_at(t)
    m = sol.params.market
    eta = sol.params.cost.eta
    return -((A[0, 0] + m.k * A[0, 1]) * q + (A[0, 1] + m.k * A[1, 1]) * S) / eta


def theta_quadratic(sol: RiccatiSolution, t: float, q: float, S: float) -> float:
    """Value-function component theta(t, q, S); equals -K q^2 at t = T."""
    A = sol.A_at(t)
    i, w = sol._locate(t)
    trace = (1.0 - w) * sol.trace_integral[i] + w * sol.trace_integral[i + 1]
    drift = (1.0 - w) * sol.const_drift[i] + w * sol.const_drift[i + 1]
    quad = A[0, 0] * q * q + 2.0 * A[0, 1] * q * S + A[1, 1] * S * S
    return -quad - trace - drift
