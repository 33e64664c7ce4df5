"""Model parameters and JSON configuration handling.

Units follow the lot-based convention used throughout the package:
prices in $/lot, inventory in lots, time in days.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

TERMINAL_KINDS = ("quadratic", "linear", "sum")


class ParamError(ValueError):
    """Raised when a parameter set violates its invariants."""


@dataclass(frozen=True)
class MarketParams:
    """Market and flow dynamics constants.

    S0: initial price ($/lot); q0: initial inventory (lot); X0: initial cash ($);
    sigma: arithmetic price volatility ($/lot/day^1/2); nu: trade-flow standard
    deviation (lot/day^1/2); rho: flow/price correlation; k: permanent impact ($/lot^2).
    """

    S0: float = 500_000.0
    q0: float = 0.0
    X0: float = 0.0
    sigma: float = 10_000.0
    nu: float = 10.0
    rho: float = 0.0
    k: float = 0.0

    def validate(self) -> None:
        if not self.sigma > 0:
            raise ParamError(f"sigma must be > 0, got {self.sigma}")
        if self.nu < 0:
            raise ParamError(f"nu must be >= 0, got {self.nu}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParamError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.k < 0:
            raise ParamError(f"k must be >= 0, got {self.k}")


@dataclass(frozen=True)
class CostParams:
    """Execution cost constants: L(v) = (psi/2)|v| + eta |v|^(1+phi).

    The power term uses |v| so the cost stays nonnegative and even for sell
    speeds; phi=1 recovers the quadratic cost eta v^2.
    """

    psi: float = 250.0
    eta: float = 5.0
    phi: float = 1.0
    terminal_kind: str = "quadratic"
    K_terminal: float = 500.0

    def validate(self) -> None:
        if self.psi < 0:
            raise ParamError(f"psi must be >= 0, got {self.psi}")
        if self.eta < 0:
            raise ParamError(f"eta must be >= 0, got {self.eta}")
        if not self.phi > 0:
            raise ParamError(f"phi must be > 0, got {self.phi}")
        if self.psi == 0 and self.eta == 0:
            raise ParamError("psi and eta cannot both be zero")
        if self.terminal_kind not in TERMINAL_KINDS:
            raise ParamError(f"terminal_kind must be one of {TERMINAL_KINDS}")
        if self.K_terminal < 0:
            raise ParamError(f"K_terminal must be >= 0, got {self.K_terminal}")


@dataclass(frozen=True)
class RiskParams:
    """Risk aversion gamma ($^-1), horizon T (day) and simulation step dt (day)."""

    gamma: float = 2e-6
    T: float = 1.0
    dt: float = 0.01

    def validate(self) -> None:
        if self.gamma < 0:
            raise ParamError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.dt <= self.T:
            raise ParamError(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ParamError(f"T/dt must be a whole number of steps, got {steps}")

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)


@dataclass(frozen=True)
class ModelParams:
    """Bundle of all model constants."""

    market: MarketParams = MarketParams()
    cost: CostParams = CostParams()
    risk: RiskParams = RiskParams()

    def validate(self) -> "ModelParams":
        self.market.validate()
        self.cost.validate()
        self.risk.validate()
        return self


@dataclass(frozen=True)
class MarketState:
    """Instantaneous state of one episode."""

    t: float
    q: float
    S: float
    X: float


# Flat JSON keys, matching the experiment-configuration convention.
_CONFIG_KEYS = {
    "T": ("risk", "T"),
    "dt": ("risk", "dt"),
    "gamma": ("risk", "gamma"),
    "S0": ("market", "S0"),
    "q0": ("market", "q0"),
    "X0": ("market", "X0"),
    "sigma": ("market", "sigma"),
    "nu": ("market", "nu"),
    "rho": ("market", "rho"),
    "k": ("market", "k"),
    "psi": ("cost", "psi"),
    "eta": ("cost", "eta"),
    "phi": ("cost", "phi"),
    "K": ("cost", "K_terminal"),
    "terminal_kind": ("cost", "terminal_kind"),
}


def default_params() -> ModelParams:
    """The baseline experiment parameter set (general case: psi, eta > 0)."""
    return ModelParams().validate()


def params_from_dict(cfg: dict[str, Any]) -> ModelParams:
    """Build and validate ModelParams from a flat config dict."""
    groups: dict[str, dict[str, Any]] = {"market": {}, "cost": {}, "risk": {}}
    for key, value in cfg.items():
        if key not in _CONFIG_KEYS:
            raise ParamError(f"unknown config key: {key!r}")
        group, field = _CONFIG_KEYS[key]
        if key == "terminal_kind":
            groups[group][field] = str(value)
        else:
            value = float(value)
            if not math.isfinite(value):
                raise ParamError(f"config key {key!r} is not finite")
            groups[group][field] = value
    params = ModelParams(
        market=MarketParams(**groups["market"]),
        cost=CostParams(**groups["cost"]),
        risk=RiskParams(**groups["risk"]),
    )
    return params.validate()


def params_to_dict(params: ModelParams) -> dict[str, Any]:
    """Flat config dict (inverse of params_from_dict)."""
    out: dict[str, Any] = {}
    raw = {"market": asdict(params.market), "cost": asdict(params.cost), "risk": asdict(params.risk)}
    for key, (group, field) in _CONFIG_KEYS.items():
        out[key] = raw[group][field]
    return out


def load_config(path: str | Path) -> ModelParams:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ParamError("config file must contain a JSON object")
    return params_from_dict(cfg)


def save_config(params: ModelParams, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")


def case_params(case: str) -> ModelParams:
    """Parameter sets for the three canonical cost cases.

    "general": psi=250, eta=5, quadratic terminal penalty.
    "psi0":    pure power costs, quadratic terminal penalty.
    "eta0":    pure spread costs, linear terminal penalty (impulse regime).
    """
    base = default_params()
    if case == "general":
        return base
    if case == "psi0":
        return replace(base, cost=replace(base.cost, psi=0.0)).validate()
    if case == "eta0":
        return replace(
            base, cost=replace(base.cost, eta=0.0, terminal_kind="linear")
        ).validate()
    raise ParamError(f"unknown case {case!r}; expected general|psi0|eta0")
