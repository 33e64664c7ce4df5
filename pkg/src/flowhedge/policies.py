"""Uniform policy abstraction: closed-form, Riccati, grid and benchmark rules.

A policy maps (t, q, S) to an action: a trading speed (lot/day) for the
"speed" flavor or a block trade (lot) for the "impulse" flavor.  Grid policies
are stored in a shared JSON document so PDE/QVI output and externally trained
policies all evaluate through the same code path:

    {"flavor": "speed"|"impulse",
     "t_grid": [...],            # ascending time nodes
     "q_grid": [...],            # ascending inventory nodes
     "actions": [[...], ...],    # (len(t_grid), len(q_grid)); speeds, or
                                 # target inventories for the impulse flavor
     "metadata": {...}}

Lookups are piecewise-constant in time (node at or before t) and linear in
inventory; queries beyond the inventory range use the boundary action.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .closed_form import control_slope
from .params import ModelParams
from .riccati import RiccatiSolution, riccati_policy

SPEED = "speed"
IMPULSE = "impulse"

BENCHMARK_THRESHOLD = 5.0
BENCHMARK_SPEED = 100.0


class PolicyFormatError(ValueError):
    """Raised when a policy document violates the schema."""


def _default_v_max(Q_max: float, T: float) -> float:
    return 10.0 * Q_max / T


class Policy:
    """Base class; concrete policies implement _act and declare a flavor."""

    kind: str
    flavor: str = SPEED
    v_max: Optional[float] = None

    def act(self, t: float, q: float, S: float) -> float:
        a = self._act(t, q, S)
        if self.flavor == SPEED and self.v_max is not None:
            if a > self.v_max:
                return self.v_max
            if a < -self.v_max:
                return -self.v_max
        return a

    def _act(self, t: float, q: float, S: float) -> float:
        raise NotImplementedError


class BenchmarkPolicy(Policy):
    """Rule-based reference: trade at a fixed speed toward zero whenever the
    inventory magnitude exceeds a threshold, do nothing otherwise."""

    kind = "benchmark"

    def __init__(self, threshold: float = BENCHMARK_THRESHOLD, speed: float = BENCHMARK_SPEED):
        self.threshold = threshold
        self.speed = speed

    def _act(self, t: float, q: float, S: float) -> float:
        if q > self.threshold:
            return -self.speed
        if q < -self.threshold:
            return self.speed
        return 0.0


class ClosedFormPolicy(Policy):
    """Linear feedback v = -(a(t)/eta) q from the quadratic-cost closed form."""

    kind = "closed_form"

    def __init__(self, params: ModelParams, v_max: Optional[float] = None):
        self.params = params
        self.v_max = v_max

    def _act(self, t: float, q: float, S: float) -> float:
        return control_slope(t, self.params) * q


class RiccatiFeedbackPolicy(Policy):
    """Linear feedback from a solved Riccati path (handles k, rho != 0)."""

    kind = "riccati"

    def __init__(self, solution: RiccatiSolution, v_max: Optional[float] = None):
        self.solution = solution
        self.v_max = v_max

    def _act(self, t: float, q: float, S: float) -> float:
        return riccati_policy(self.solution, t, q, S)


class GridPolicy(Policy):
    """Tabulated policy on a (t, q) grid, speed or impulse flavored."""

    def __init__(
        self,
        flavor: str,
        t_grid: np.ndarray,
        q_grid: np.ndarray,
        actions: np.ndarray,
        metadata: Optional[dict] = None,
        v_max: Optional[float] = None,
    ):
        self.flavor = flavor
        self.kind = "grid_speed" if flavor == SPEED else "grid_impulse"
        self.t_grid = t_grid
        self.q_grid = q_grid
        self.actions = actions
        self.metadata = metadata or {}
        if flavor == SPEED:
            T = float(t_grid[-1]) if t_grid[-1] > 0 else 1.0
            self.v_max = v_max if v_max is not None else _default_v_max(float(q_grid[-1]), T)

    def _row(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.t_grid, t, side="right")) - 1
        idx = max(0, min(idx, len(self.t_grid) - 1))
        return self.actions[idx]

    def _act(self, t: float, q: float, S: float) -> float:
        row = self._row(t)
        value = float(np.interp(q, self.q_grid, row))
        if self.flavor == IMPULSE:
            # actions hold target inventories; outside the grid keep the
            # boundary target (hedge back to the edge of the solved region)
            return value - q
        return value

    def to_doc(self) -> dict:
        return {
            "flavor": self.flavor,
            "t_grid": np.asarray(self.t_grid).tolist(),
            "q_grid": np.asarray(self.q_grid).tolist(),
            "actions": np.asarray(self.actions).tolist(),
            "metadata": self.metadata,
        }


def validate_policy_doc(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise PolicyFormatError("policy document must be a JSON object")
    flavor = doc.get("flavor")
    if flavor not in (SPEED, IMPULSE):
        raise PolicyFormatError(f"flavor must be 'speed' or 'impulse', got {flavor!r}")
    for key in ("t_grid", "q_grid", "actions"):
        if key not in doc:
            raise PolicyFormatError(f"policy document missing {key!r}")
    t_grid = np.asarray(doc["t_grid"], dtype=float)
    q_grid = np.asarray(doc["q_grid"], dtype=float)
    actions = np.asarray(doc["actions"], dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1:
        raise PolicyFormatError("t_grid must be a non-empty 1-D array")
    if q_grid.ndim != 1 or len(q_grid) < 2:
        raise PolicyFormatError("q_grid must hold at least two nodes")
    if len(t_grid) > 1 and not np.all(np.diff(t_grid) > 0):
        raise PolicyFormatError("t_grid must be strictly increasing")
    if not np.all(np.diff(q_grid) > 0):
        raise PolicyFormatError("q_grid must be strictly increasing")
    if not (np.all(np.isfinite(t_grid)) and np.all(np.isfinite(q_grid))):
        raise PolicyFormatError("grids must be finite")
    if actions.shape != (len(t_grid), len(q_grid)):
        raise PolicyFormatError(
            f"actions shape {actions.shape} does not match grids "
            f"({len(t_grid)}, {len(q_grid)})"
        )
    if not np.all(np.isfinite(actions)):
        raise PolicyFormatError("actions must be finite")
    return {"flavor": flavor, "t_grid": t_grid, "q_grid": q_grid, "actions": actions,
            "metadata": doc.get("metadata", {})}


def policy_from_doc(doc: dict, v_max: Optional[float] = None) -> GridPolicy:
    parts = validate_policy_doc(doc)
    return GridPolicy(
        flavor=parts["flavor"],
        t_grid=parts["t_grid"],
        q_grid=parts["q_grid"],
        actions=parts["actions"],
        metadata=parts["metadata"],
        v_max=v_max,
    )


def load_policy(path: str | Path, v_max: Optional[float] = None) -> GridPolicy:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolicyFormatError(f"invalid JSON in {path}: {exc}") from exc
    return policy_from_doc(doc, v_max=v_max)


def save_policy(policy: GridPolicy, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(policy.to_doc(), fh)
        fh.write("\n")


def builtin_policy(name: str, params: ModelParams) -> Policy:
    """Policies addressable as 'builtin:<name>' from the CLI and the service."""
    if name == "benchmark":
        return BenchmarkPolicy()
    if name == "closed-form":
        return ClosedFormPolicy(params)
    raise PolicyFormatError(f"unknown builtin policy {name!r}; expected benchmark|closed-form")
