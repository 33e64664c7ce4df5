import { describe, expect, it } from "vitest";
import { computeGae, normalize } from "../src/gae.js";

describe("computeGae", () => {
  it("matches a hand-computed three-step rollout", () => {
    const gamma = 0.5;
    const lambda = 0.5;
    const rewards = [1.0, 2.0, 3.0];
    const values = [10.0, 20.0, 30.0, 40.0];
    const dones = [false, false, false];
    // deltas: 1 + 0.5*20 - 10 = 1;  2 + 0.5*30 - 20 = -3;  3 + 0.5*40 - 30 = -7
    // gae backward with factor 0.25: a2 = -7; a1 = -3 + 0.25*(-7) = -4.75;
    // a0 = 1 + 0.25*(-4.75) = -0.1875
    const { advantages, returns } = computeGae(rewards, values, dones, gamma, lambda);
    expect(Array.from(advantages)).toEqual([-0.1875, -4.75, -7.0]);
    expect(Array.from(returns)).toEqual([9.8125, 15.25, 23.0]);
  });

  it("resets accumulation and bootstrap at episode boundaries", () => {
    const rewards = [1.0, 1.0];
    const values = [5.0, 7.0, 9.0];
    const dones = [true, false];
    const { advantages } = computeGae(rewards, values, dones, 0.9, 0.8);
    // step 0 ends an episode: delta = 1 - 5 = -4 and no flow-through from step 1
    // (float32 storage, so compare at single precision)
    expect(advantages[0]).toBeCloseTo(-4.0, 6);
    expect(advantages[1]).toBeCloseTo(1.0 + 0.9 * 9.0 - 7.0, 6);
  });

  it("rejects mismatched lengths", () => {
    expect(() => computeGae([1], [1], [false], 0.9, 0.9)).toThrow();
  });
});

describe("normalize", () => {
  it("produces zero mean and unit variance", () => {
    const out = normalize(new Float32Array([1, 2, 3, 4, 5, 6]));
    const mean = Array.from(out).reduce((a, b) => a + b, 0) / out.length;
    const varr = Array.from(out).reduce((a, b) => a + b * b, 0) / out.length;
    expect(mean).toBeCloseTo(0, 6);
    expect(varr).toBeCloseTo(1, 3);
  });
});
