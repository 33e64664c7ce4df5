"""Environment service: episodes over a line-delimited JSON protocol.

One message per line, one session per connection.  Commands:

  {"cmd": "configure", "config": {...}, "t0": 0.0, "seed": 0,
   "include_state_only_reward_terms": true, "q0_sample": "fixed"}
      -> {"ok": true, "n_steps": N}
  {"cmd": "reset"}           -> {"obs": {"t":..., "q":..., "S":...}}
  {"cmd": "step", "v": 1.5}  -> {"obs": {...}, "reward": ..., "done": false}
  {"cmd": "close"}           -> {"ok": true}

Rewards are the running reward times dt, plus the terminal penalty on the
final step.  Episode i after a configure uses the RNG stream derived from
(seed, i), matching the evaluation harness exactly, so a scripted client
replaying a policy reproduces evaluate()'s rewards bit for bit.  Errors are
answered as {"error": code, "msg": ...} and never advance the episode.

t0 starts episodes mid-horizon (progressive training); q0_sample chooses the
initial inventory at reset: "fixed" uses the configured q0, "stationary_proxy"
draws q0 ~ Normal(0, nu^2 t0) to mimic states reached by time t0.
"""

from __future__ import annotations

import json
import math
import socket
import socketserver
import sys
from typing import Optional

from .params import ModelParams, ParamError, params_from_dict
from .simulate import EpisodeEngine, draw_shocks, episode_rng

Q0_MODES = ("fixed", "stationary_proxy")


class EnvSession:
    """State machine for one client connection."""

    def __init__(self, params: Optional[ModelParams] = None):
        self.params = params
        self.t0 = 0.0
        self.seed = 0
        self.include_state_only = True
        self.q0_mode = "fixed"
        self.episode_index = 0
        self.engine: Optional[EpisodeEngine] = None

    def handle(self, msg: dict) -> dict:
        if not isinstance(msg, dict):
            return {"error": "bad_message", "msg": "message must be a JSON object"}
        cmd = msg.get("cmd")
        if cmd == "configure":
            return self._configure(msg)
        if cmd == "reset":
            return self._reset()
        if cmd == "step":
            return self._step(msg)
        if cmd == "close":
            self.engine = None
            return {"ok": True, "closed": True}
        return {"error": "unknown_cmd", "msg": f"unknown cmd {cmd!r}"}

    def handle_line(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": "bad_json", "msg": str(exc)}
        return self.handle(msg)

    def _configure(self, msg: dict) -> dict:
        try:
            if "config" in msg:
                params = params_from_dict(msg["config"])
            elif self.params is not None:
                params = self.params
            else:
                return {"error": "bad_config", "msg": "no config provided and no default loaded"}
            t0 = float(msg.get("t0", 0.0))
            if not 0.0 <= t0 < params.risk.T:
                raise ParamError(f"t0 must lie in [0, T), got {t0}")
            steps0 = (params.risk.T - t0) / params.risk.dt
            if abs(steps0 - round(steps0)) > 1e-9 * max(1.0, steps0):
                raise ParamError("T - t0 must be a whole number of steps")
            q0_mode = msg.get("q0_sample", "fixed")
            if q0_mode not in Q0_MODES:
                raise ParamError(f"q0_sample must be one of {Q0_MODES}")
            self.params = params
            self.t0 = t0
            self.seed = int(msg.get("seed", 0))
            self.include_state_only = bool(msg.get("include_state_only_reward_terms", True))
            self.q0_mode = q0_mode
            self.episode_index = 0
            self.engine = None
            return {"ok": True, "n_steps": round(steps0)}
        except (ParamError, TypeError, ValueError) as exc:
            return {"error": "bad_config", "msg": str(exc)}

    def _reset(self) -> dict:
        if self.params is None:
            return {"error": "not_configured", "msg": "send configure first"}
        params = self.params
        rng = episode_rng(self.seed, self.episode_index)
        self.episode_index += 1
        q0 = None
        if self.q0_mode == "stationary_proxy":
            q0 = float(params.market.nu * math.sqrt(self.t0) * rng.standard_normal())
        n_steps = round((params.risk.T - self.t0) / params.risk.dt)
        shocks = draw_shocks(rng, n_steps, params.risk.dt, params.market.rho)
        self.engine = EpisodeEngine(
            params,
            shocks,
            t0=self.t0,
            q0=q0,
            include_state_only=self.include_state_only,
        )
        return {"obs": self._obs()}

    def _step(self, msg: dict) -> dict:
        if self.engine is None:
            return {"error": "no_episode", "msg": "send reset first"}
        if self.engine.done:
            return {"error": "episode_done", "msg": "episode finished; send reset"}
        v = msg.get("v")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            return {"error": "bad_action", "msg": "step requires a finite numeric 'v'"}
        reward, done = self.engine.step(float(v))
        return {"obs": self._obs(), "reward": reward, "done": done}

    def _obs(self) -> dict:
        s = self.engine.state
        return {"t": s.t, "q": s.q, "S": s.S}


def serve_stdio(params: Optional[ModelParams] = None, *, stdin=None, stdout=None) -> None:
    """Serve one session over stdin/stdout until EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = EnvSession(params)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        resp = session.handle_line(line)
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()
        if resp.get("closed"):
            break


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = EnvSession(self.server.default_params)  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            resp = session.handle_line(line)
            self.wfile.write((json.dumps(resp) + "\n").encode())
            if resp.get("closed"):
                break


class EnvServer(socketserver.ThreadingTCPServer):
    """TCP transport; each connection gets an independent session."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, port: int, params: Optional[ModelParams] = None, host: str = "127.0.0.1"):
        super().__init__((host, port), _Handler)
        self.default_params = params


def serve_tcp(port: int, params: Optional[ModelParams] = None, host: str = "127.0.0.1") -> None:
    with EnvServer(port, params, host) as server:
        print(f"env service listening on {host}:{server.server_address[1]}", file=sys.stderr)
        server.serve_forever()


class EnvClient:
    """Minimal TCP client for tests and scripted policies."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.fh = self.sock.makefile("rwb")

    def request(self, msg: dict) -> dict:
        self.fh.write((json.dumps(msg) + "\n").encode())
        self.fh.flush()
        line = self.fh.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return json.loads(line)

    def close(self) -> None:
        try:
            self.fh.close()
        finally:
            self.sock.close()
