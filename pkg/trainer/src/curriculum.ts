/** Progressive training schedule: late-horizon sub-episodes first, then full
 * episodes.  Stage budgets keep the paper's proportions: one tenth of the
 * total per restricted stage, the remaining half on full episodes. */

export interface Stage {
  t0: number;
  steps: number;
}

export const PROGRESSIVE_T0 = [0.9, 0.7, 0.5, 0.3, 0.1];

export function progressiveSchedule(totalSteps: number, horizon = 1.0): Stage[] {
  if (totalSteps <= 0) throw new Error("totalSteps must be positive");
  const stageBudget = Math.floor(totalSteps / 10);
  const stages: Stage[] = PROGRESSIVE_T0.map((frac) => ({
    t0: frac * horizon,
    steps: stageBudget,
  }));
  const used = stageBudget * PROGRESSIVE_T0.length;
  stages.push({ t0: 0.0, steps: totalSteps - used });
  return stages;
}

export function flatSchedule(totalSteps: number): Stage[] {
  if (totalSteps <= 0) throw new Error("totalSteps must be positive");
  return [{ t0: 0.0, steps: totalSteps }];
}
