"""FastAPI app wrapping the solvers and the evaluation harness.

The handler functions are plain request -> response functions; the CLI calls
them in-process and the HTTP routes are thin wrappers that translate domain
errors into status codes.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..closed_form import a_closed, alpha_beta, control_slope
from ..evaluation import evaluate, rewards_array, summarize
from ..hjb import GridSpec, solve_hjb
from ..params import ParamError, case_params
from ..policies import PolicyFormatError, builtin_policy, policy_from_doc
from ..qvi import solve_qvi
from ..riccati import RiccatiBlowUpError, RiccatiSpec, solve_riccati
from ..stats import mann_whitney_u, welch_t_test
from .schemas import (
    ClosedFormRequest,
    ClosedFormResponse,
    CompareRequest,
    CompareResponse,
    ConfigModel,
    EvaluateRequest,
    EvaluateResponse,
    GridModel,
    HjbSolveRequest,
    HjbSolveResponse,
    PolicyDoc,
    QviSolveRequest,
    QviSolveResponse,
    RiccatiSolutionModel,
    RiccatiSolveRequest,
    SurfaceModel,
)


def _grid_spec(grid: GridModel) -> GridSpec:
    return GridSpec(Q_max=grid.Q_max, n_q=grid.n_q, n_t=grid.n_t).validate()


def handle_default_config(case: str = "general") -> ConfigModel:
    return ConfigModel.from_params(case_params(case))


def handle_riccati(req: RiccatiSolveRequest) -> RiccatiSolutionModel:
    spec = RiccatiSpec(model=req.model, params=req.config.to_params(), n_steps=req.n_steps)
    sol = solve_riccati(spec.validate())
    return RiccatiSolutionModel(**sol.to_json_dict())


def handle_hjb(req: HjbSolveRequest) -> HjbSolveResponse:
    params = req.config.to_params()
    surface, policy = solve_hjb(params, _grid_spec(req.grid), boundary=req.boundary)
    doc = policy.to_policy_doc(metadata={"source": "hjb", "boundary": req.boundary})
    resp = HjbSolveResponse(policy=PolicyDoc(**doc))
    if req.include_surface:
        resp.surface = SurfaceModel(**surface.to_json_dict())
    return resp


def handle_qvi(req: QviSolveRequest) -> QviSolveResponse:
    params = req.config.to_params()
    surface = solve_qvi(params, _grid_spec(req.grid))
    doc = surface.to_policy_doc(metadata={"source": "qvi"})
    return QviSolveResponse(
        policy=PolicyDoc(**doc), no_trade_interval_t0=surface.no_trade_interval(0)
    )


def handle_evaluate(req: EvaluateRequest) -> EvaluateResponse:
    params = req.config.to_params()
    if req.policy.builtin is not None:
        policy = builtin_policy(req.policy.builtin, params)
    else:
        policy = policy_from_doc(req.policy.document.model_dump())
    results = evaluate(
        policy,
        params,
        req.episodes,
        req.seed,
        threads=req.threads,
        include_state_only=req.include_state_only_reward_terms,
    )
    rewards = rewards_array(results)
    return EvaluateResponse(
        summary=summarize(rewards),
        rewards=rewards.tolist() if req.include_rewards else None,
    )


def handle_compare(req: CompareRequest) -> CompareResponse:
    welch = welch_t_test(req.rewards_a, req.rewards_b)
    mwu = mann_whitney_u(req.rewards_a, req.rewards_b)
    significant = welch["p_two_sided"] < 0.05 or mwu["p_two_sided"] < 0.05
    return CompareResponse(welch=welch, mann_whitney=mwu, significant_5pct=significant)


def handle_closed_form(req: ClosedFormRequest) -> ClosedFormResponse:
    params = req.config.to_params()
    a = a_closed(req.t, params)
    slope = control_slope(req.t, params)
    alpha, beta = alpha_beta(req.t, params)
    return ClosedFormResponse(a=a, slope=slope, speed=slope * req.q, alpha=alpha, beta=beta)


app = FastAPI(title="flowhedge", version=__version__)


def _wrap(handler, req):
    try:
        return handler(req)
    except (ParamError, PolicyFormatError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except RiccatiBlowUpError as exc:
        raise HTTPException(status_code=409, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/config/default", response_model=ConfigModel)
def default_config(case: str = "general"):
    try:
        return handle_default_config(case)
    except ParamError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.post("/riccati/solve", response_model=RiccatiSolutionModel)
def riccati_solve(req: RiccatiSolveRequest):
    return _wrap(handle_riccati, req)


@app.post("/hjb/solve", response_model=HjbSolveResponse)
def hjb_solve(req: HjbSolveRequest):
    return _wrap(handle_hjb, req)


@app.post("/qvi/solve", response_model=QviSolveResponse)
def qvi_solve(req: QviSolveRequest):
    return _wrap(handle_qvi, req)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_policy(req: EvaluateRequest):
    return _wrap(handle_evaluate, req)


@app.post("/compare", response_model=CompareResponse)
def compare(req: CompareRequest):
    return _wrap(handle_compare, req)


@app.post("/closed-form", response_model=ClosedFormResponse)
def closed_form(req: ClosedFormRequest):
    return _wrap(handle_closed_form, req)
