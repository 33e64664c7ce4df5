"""flowhedge: solvers and evaluation tooling for stochastic trade flow hedging."""

__version__ = "0.1.0"

from .params import CostParams, MarketParams, MarketState, ModelParams, RiskParams  # noqa: F401
