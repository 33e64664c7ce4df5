"""Out-of-sample Monte Carlo policy evaluation.

Episode i always draws its shocks from the stream derived from (seed, i), so
two policies evaluated with the same seed face bitwise-identical paths
(common random numbers) and results do not depend on worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .params import ModelParams
from .policies import Policy
from .simulate import EpisodeEngine, EpisodeResult, draw_shocks, episode_rng


def run_episode(
    policy: Policy,
    params: ModelParams,
    seed: int,
    episode_index: int,
    record: bool = False,
    include_state_only: bool = True,
) -> EpisodeResult:
    """Simulate one full episode under the given policy."""
    rng = episode_rng(seed, episode_index)
    shocks = draw_shocks(rng, params.risk.n_steps, params.risk.dt, params.market.rho)
    engine = EpisodeEngine(
        params,
        shocks,
        action_kind=policy.flavor,
        include_state_only=include_state_only,
        record=record,
    )
    while not engine.done:
        s = engine.state
        engine.step(policy.act(s.t, s.q, s.S))
    return engine.result()


def evaluate(
    policy: Policy,
    params: ModelParams,
    n_episodes: int,
    seed: int,
    threads: int = 1,
    record: bool = False,
    include_state_only: bool = True,
) -> list[EpisodeResult]:
    """Evaluate a policy over n_episodes; deterministic given the seed.

    include_state_only=False drops the reward terms that no policy can affect
    (with k = 0 they are bitwise-identical across policies under common random
    numbers), which sharpens unpaired two-sample comparisons without changing
    the ordering of means.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    params.validate()
    if threads <= 1:
        return [
            run_episode(policy, params, seed, i, record, include_state_only)
            for i in range(n_episodes)
        ]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(run_episode, policy, params, seed, i, record, include_state_only)
            for i in range(n_episodes)
        ]
        return [f.result() for f in futures]


def rewards_array(results: list[EpisodeResult]) -> np.ndarray:
    return np.array([r.total_reward for r in results])


QUANTILES = (1, 5, 25, 50, 75, 95, 99)


def summarize(rewards) -> dict:
    """Summary statistics; quantiles by linear interpolation of order stats."""
    x = np.asarray(rewards, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("need a non-empty 1-D sample")
    qs = np.quantile(x, [p / 100.0 for p in QUANTILES])
    return {
        "n": int(len(x)),
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
        "min": float(x.min()),
        "max": float(x.max()),
        "quantiles": {str(p): float(v) for p, v in zip(QUANTILES, qs)},
    }


def silverman_bandwidth(x: np.ndarray) -> float:
    n = len(x)
    std = float(x.std(ddof=1)) if n > 1 else 0.0
    iqr = float(np.quantile(x, 0.75) - np.quantile(x, 0.25))
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    if scale == 0.0:
        scale = max(abs(float(x[0])), 1.0) * 1e-3  # degenerate sample
    return 0.9 * scale * n ** (-0.2)


def gaussian_kde(x: np.ndarray, n_points: int = 512) -> dict:
    """Gaussian-kernel density on an evenly spaced grid (Silverman bandwidth)."""
    h = silverman_bandwidth(x)
    lo = float(x.min()) - 3.0 * h
    hi = float(x.max()) + 3.0 * h
    grid = np.linspace(lo, hi, n_points)
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * h * np.sqrt(2.0 * np.pi))
    return {"x": grid.tolist(), "density": dens.tolist(), "bandwidth": h}


def export_distribution(results: list[EpisodeResult] | np.ndarray, path: str | Path) -> Path:
    """Write one reward per CSV row plus a JSON sidecar with summary stats and
    a 512-point KDE; returns the sidecar path."""
    if isinstance(results, (list, tuple)) and results and isinstance(results[0], EpisodeResult):
        rewards = rewards_array(results)
    else:
        rewards = np.asarray(results, dtype=float)
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("reward\n")
        for r in rewards:
            fh.write(f"{float(r)!r}\n")
    sidecar = path.with_suffix(".stats.json")
    with open(sidecar, "w") as fh:
        json.dump({"summary": summarize(rewards), "kde": gaussian_kde(rewards)}, fh)
        fh.write("\n")
    return sidecar


def read_rewards_csv(path: str | Path) -> np.ndarray:
    """Read a rewards CSV (optional single header line)."""
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                if values:
                    raise
                # header line
    if not values:
        raise ValueError(f"no rewards found in {path}")
    return np.array(values)
