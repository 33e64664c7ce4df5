"""Pydantic request/response models for the HTTP service.

ConfigModel mirrors the flat JSON configuration file key for key, so the same
document works as a config file, a request body and a service response.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..params import ModelParams, params_from_dict, params_to_dict


class ConfigModel(BaseModel):
    T: float = 1.0
    dt: float = 0.01
    S0: float = 500_000.0
    sigma: float = 10_000.0
    nu: float = 10.0
    psi: float = 250.0
    eta: float = 5.0
    phi: float = 1.0
    gamma: float = 2e-6
    K: float = 500.0
    k: float = 0.0
    rho: float = 0.0
    q0: float = 0.0
    X0: float = 0.0
    terminal_kind: Literal["quadratic", "linear", "sum"] = "quadratic"

    def to_params(self) -> ModelParams:
        return params_from_dict(self.model_dump())

    @classmethod
    def from_params(cls, params: ModelParams) -> "ConfigModel":
        return cls(**params_to_dict(params))


class GridModel(BaseModel):
    Q_max: float = 40.0
    n_q: int = 161
    n_t: int = 100


class PolicyDoc(BaseModel):
    flavor: Literal["speed", "impulse"]
    t_grid: list[float]
    q_grid: list[float]
    actions: list[list[float]]
    metadata: dict = Field(default_factory=dict)


class RiccatiSolveRequest(BaseModel):
    model: Literal["A", "B"] = "B"
    config: ConfigModel = Field(default_factory=ConfigModel)
    n_steps: int = 0  # 0 -> solver default


class RiccatiSolutionModel(BaseModel):
    model: Literal["A", "B"]
    times: list[float]
    A_entries: list[list[float]]  # [a11, a12, a22] per time node
    trace_integral: list[float]
    const_drift: list[float]


class SurfaceModel(BaseModel):
    grid: GridModel
    t_grid: list[float]
    q_grid: list[float]
    theta_tilde: list[list[float]]
    alpha: list[float]
    beta: list[float]


class HjbSolveRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    grid: GridModel = Field(default_factory=GridModel)
    boundary: Literal["neumann", "extrapolate"] = "neumann"
    include_surface: bool = False


class HjbSolveResponse(BaseModel):
    policy: PolicyDoc
    surface: Optional[SurfaceModel] = None


class QviSolveRequest(BaseModel):
    config: ConfigModel
    grid: GridModel = Field(default_factory=GridModel)


class QviSolveResponse(BaseModel):
    policy: PolicyDoc
    no_trade_interval_t0: tuple[float, float]


class PolicyRef(BaseModel):
    """Either a builtin policy name or an inline grid policy document."""

    builtin: Optional[Literal["benchmark", "closed-form"]] = None
    document: Optional[PolicyDoc] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.builtin is None) == (self.document is None):
            raise ValueError("provide exactly one of 'builtin' or 'document'")
        return self


class EvaluateRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    policy: PolicyRef
    episodes: int = 10_000
    seed: int = 42
    threads: int = 1
    include_rewards: bool = False
    # drop reward terms no policy can affect (sharper CRN comparisons)
    include_state_only_reward_terms: bool = True


class EvaluateResponse(BaseModel):
    summary: dict
    rewards: Optional[list[float]] = None


class CompareRequest(BaseModel):
    rewards_a: list[float]
    rewards_b: list[float]


class CompareResponse(BaseModel):
    welch: dict
    mann_whitney: dict
    significant_5pct: bool


class ClosedFormRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    t: float = 0.0
    q: float = 1.0


class ClosedFormResponse(BaseModel):
    a: float
    slope: float
    speed: float
    alpha: float
    beta: float
