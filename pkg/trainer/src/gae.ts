/** Generalised advantage estimation over a rollout that may span several
 * episodes.  `values` has one trailing entry: the bootstrap value of the state
 * after the last step (ignored when that step ended an episode). */
export function computeGae(
  rewards: number[],
  values: number[],
  dones: boolean[],
  gamma: number,
  lambda: number,
): { advantages: Float32Array; returns: Float32Array } {
  const n = rewards.length;
  if (values.length !== n + 1 || dones.length !== n) {
    throw new Error("computeGae: rewards/dones need n entries and values n+1");
  }
  const advantages = new Float32Array(n);
  let gae = 0;
  for (let i = n - 1; i >= 0; i--) {
    const nextValue = dones[i] ? 0 : values[i + 1];
    const delta = rewards[i] + gamma * nextValue - values[i];
    gae = delta + (dones[i] ? 0 : gamma * lambda * gae);
    advantages[i] = gae;
  }
  const returns = new Float32Array(n);
  for (let i = 0; i < n; i++) returns[i] = advantages[i] + values[i];
  return { advantages, returns };
}

export function normalize(x: Float32Array): Float32Array {
  const n = x.length;
  let mean = 0;
  for (let i = 0; i < n; i++) mean += x[i];
  mean /= n;
  let variance = 0;
  for (let i = 0; i < n; i++) variance += (x[i] - mean) ** 2;
  const std = Math.sqrt(variance / n) + 1e-8;
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = (x[i] - mean) / std;
  return out;
}
