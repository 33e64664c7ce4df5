"""Command-line entry point.

Every subcommand marshals its flags into the service request models and runs
the matching handler, in-process by default or against a running HTTP service
with --server.  Data goes to stdout (or --out files); diagnostics to stderr.

Exit codes: 0 success, 1 significance threshold crossed (compare), 2 errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from .envproto import serve_stdio, serve_tcp
from .evaluation import export_distribution, read_rewards_csv
from .params import ParamError, case_params, load_config, params_to_dict, save_config
from .policies import PolicyFormatError
from .riccati import RiccatiBlowUpError
from .service.app import (
    handle_closed_form,
    handle_compare,
    handle_evaluate,
    handle_hjb,
    handle_qvi,
    handle_riccati,
)
from .service.schemas import (
    ClosedFormRequest,
    CompareRequest,
    ConfigModel,
    EvaluateRequest,
    GridModel,
    HjbSolveRequest,
    PolicyDoc,
    PolicyRef,
    QviSolveRequest,
    RiccatiSolveRequest,
)

_ROUTES = {
    "riccati": ("/riccati/solve", handle_riccati),
    "hjb": ("/hjb/solve", handle_hjb),
    "qvi": ("/qvi/solve", handle_qvi),
    "evaluate": ("/evaluate", handle_evaluate),
    "compare": ("/compare", handle_compare),
    "closed-form": ("/closed-form", handle_closed_form),
}


def _dispatch(name: str, req, server: str | None) -> dict:
    path, handler = _ROUTES[name]
    if server is None:
        return handler(req).model_dump()
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=req.model_dump(), timeout=600.0)
    if resp.status_code != 200:
        raise RuntimeError(f"service error {resp.status_code}: {resp.text}")
    return resp.json()


def _config_model(path: str | None) -> ConfigModel:
    if path is None:
        return ConfigModel()
    return ConfigModel(**params_to_dict(load_config(path)))


def _parse_grid(text: str | None) -> GridModel:
    if text is None:
        return GridModel()
    try:
        q_max, n_q, n_t = text.split(",")
        return GridModel(Q_max=float(q_max), n_q=int(n_q), n_t=int(n_t))
    except ValueError as exc:
        raise ParamError(f"--grid expects 'Qmax,nq,nt', got {text!r}") from exc


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_init_config(args) -> int:
    params = case_params(args.case)
    if args.out:
        save_config(params, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        _emit(params_to_dict(params))
    return 0


def cmd_solve_riccati(args) -> int:
    req = RiccatiSolveRequest(
        model=args.model, config=_config_model(args.config), n_steps=args.n_steps
    )
    out = _dispatch("riccati", req, args.server)
    _write_json(out, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_solve_hjb(args) -> int:
    req = HjbSolveRequest(
        config=_config_model(args.config),
        grid=_parse_grid(args.grid),
        boundary=args.boundary,
        include_surface=args.surface is not None,
    )
    out = _dispatch("hjb", req, args.server)
    _write_json(out["policy"], args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    if args.surface is not None:
        _write_json(out["surface"], args.surface)
        print(f"wrote {args.surface}", file=sys.stderr)
    return 0


def cmd_solve_qvi(args) -> int:
    req = QviSolveRequest(config=_config_model(args.config), grid=_parse_grid(args.grid))
    out = _dispatch("qvi", req, args.server)
    _write_json(out["policy"], args.out)
    lo, hi = out["no_trade_interval_t0"]
    print(f"wrote {args.out} (no-trade interval at t=0: [{lo}, {hi}])", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    if args.policy.startswith("builtin:"):
        ref = PolicyRef(builtin=args.policy.split(":", 1)[1])
    else:
        with open(args.policy) as fh:
            ref = PolicyRef(document=PolicyDoc(**json.load(fh)))
    req = EvaluateRequest(
        config=_config_model(args.config),
        policy=ref,
        episodes=args.episodes,
        seed=args.seed,
        threads=args.threads,
        include_rewards=True,
        include_state_only_reward_terms=not args.drop_state_only_rewards,
    )
    out = _dispatch("evaluate", req, args.server)
    if args.out:
        export_distribution(out["rewards"], args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    _emit(out["summary"])
    return 0


def cmd_compare(args) -> int:
    req = CompareRequest(
        rewards_a=read_rewards_csv(args.a).tolist(),
        rewards_b=read_rewards_csv(args.b).tolist(),
    )
    out = _dispatch("compare", req, args.server)
    _emit(out)
    return 1 if out["significant_5pct"] else 0


def cmd_closed_form(args) -> int:
    req = ClosedFormRequest(config=_config_model(args.config), t=args.t, q=args.q)
    out = _dispatch("closed-form", req, args.server)
    _emit(out)
    return 0


def cmd_serve_env(args) -> int:
    params = load_config(args.config) if args.config else case_params("general")
    if args.stdio:
        serve_stdio(params)
    else:
        if args.port is None:
            raise ParamError("serve-env needs --stdio or --port N")
        serve_tcp(args.port, params, host=args.host)
    return 0


def cmd_serve_api(args) -> int:
    import uvicorn

    uvicorn.run("flowhedge.service.app:app", host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowhedge",
        description="Optimal internalisation/externalisation policies for stochastic trade flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON config file (defaults to baseline parameters)")
        p.add_argument("--server", help="run against a flowhedge HTTP service at this URL")

    p = sub.add_parser("init-config", help="write a baseline configuration file")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--case", default="general", choices=["general", "psi0", "eta0"])
    p.set_defaults(fn=cmd_init_config)

    p = sub.add_parser("solve-riccati", help="solve the quadratic-cost matrix Riccati problem")
    add_common(p)
    p.add_argument("--model", default="B", choices=["A", "B"])
    p.add_argument("--n-steps", type=int, default=0, help="integration steps (0 = default)")
    p.add_argument("--out", required=True, help="solution JSON path")
    p.set_defaults(fn=cmd_solve_riccati)

    p = sub.add_parser("solve-hjb", help="solve the reduced inventory PDE")
    add_common(p)
    p.add_argument("--grid", help="Qmax,nq,nt (default 40,161,100)")
    p.add_argument("--boundary", default="neumann", choices=["neumann", "extrapolate"])
    p.add_argument("--out", required=True, help="policy JSON path")
    p.add_argument("--surface", help="also write the value surface JSON here")
    p.set_defaults(fn=cmd_solve_hjb)

    p = sub.add_parser("solve-qvi", help="solve the impulse-control problem (eta = 0)")
    add_common(p)
    p.add_argument("--grid", help="Qmax,nq,nt (default 40,161,100)")
    p.add_argument("--out", required=True, help="policy JSON path")
    p.set_defaults(fn=cmd_solve_qvi)

    p = sub.add_parser("evaluate", help="Monte Carlo evaluation of a policy")
    add_common(p)
    p.add_argument("--policy", required=True,
                   help="policy JSON file, builtin:benchmark or builtin:closed-form")
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="rewards CSV path (stats sidecar written alongside)")
    p.add_argument("--drop-state-only-rewards", action="store_true",
                   help="exclude reward terms no policy can affect (sharper comparisons)")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("compare", help="Welch t and Mann-Whitney tests on two reward CSVs")
    add_common(p, config=False)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("closed-form", help="print a(t), slope, alpha, beta at a point")
    add_common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--q", type=float, default=1.0)
    p.set_defaults(fn=cmd_closed_form)

    p = sub.add_parser("serve-env", help="run the episode environment service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--stdio", action="store_true", help="serve one session over stdio")
    p.add_argument("--port", type=int, help="serve TCP sessions on this port")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve_env)

    p = sub.add_parser("serve-api", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve_api)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParamError, PolicyFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RiccatiBlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
