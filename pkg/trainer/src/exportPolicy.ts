/** Export the trained deterministic policy (the Gaussian mean) sampled on a
 * (t, q) grid, in the shared policy JSON format consumed by the evaluation
 * harness (see docs/policy_format.md in the repository root). */
import { PpoAgent } from "./ppo.js";

export interface PolicyDoc {
  flavor: "speed";
  t_grid: number[];
  q_grid: number[];
  actions: number[][];
  metadata: Record<string, unknown>;
}

export function linspace(lo: number, hi: number, n: number): number[] {
  const out = new Array<number>(n);
  for (let i = 0; i < n; i++) out[i] = lo + ((hi - lo) * i) / (n - 1);
  return out;
}

export function exportPolicyGrid(
  agent: PpoAgent,
  opts: {
    horizon: number;
    qMax: number;
    nT: number; // time steps; the grid has nT + 1 rows
    nQ: number; // inventory nodes (odd keeps q = 0 on the grid)
    metadata?: Record<string, unknown>;
  },
): PolicyDoc {
  const tGrid = linspace(0, opts.horizon, opts.nT + 1);
  const qGrid = linspace(-opts.qMax, opts.qMax, opts.nQ);
  const actions: number[][] = [];
  for (const t of tGrid) {
    const rows = qGrid.map((q) => [t / agent.cfg.horizon, q / agent.cfg.inventoryScale]);
    actions.push(Array.from(agent.meanActions(rows)));
  }
  return {
    flavor: "speed",
    t_grid: tGrid,
    q_grid: qGrid,
    actions,
    metadata: { source: "ppo-trainer", ...opts.metadata },
  };
}

export function validatePolicyDoc(doc: PolicyDoc): void {
  if (doc.flavor !== "speed") throw new Error("flavor must be 'speed'");
  const { t_grid, q_grid, actions } = doc;
  if (t_grid.length < 1 || q_grid.length < 2) throw new Error("grids too small");
  for (let i = 1; i < t_grid.length; i++) {
    if (!(t_grid[i] > t_grid[i - 1])) throw new Error("t_grid must be strictly increasing");
  }
  for (let i = 1; i < q_grid.length; i++) {
    if (!(q_grid[i] > q_grid[i - 1])) throw new Error("q_grid must be strictly increasing");
  }
  if (actions.length !== t_grid.length) throw new Error("actions row count mismatch");
  for (const row of actions) {
    if (row.length !== q_grid.length) throw new Error("actions column count mismatch");
    for (const a of row) {
      if (!Number.isFinite(a)) throw new Error("actions must be finite");
    }
  }
}
