/** Hand-rolled MLPs on tf variables: full control over (seeded) weight init
 * and a SiLU activation that does not depend on the layers registry.
 *
 * tf engine variable names must be globally unique, so registration names
 * carry an instance id while checkpoints use stable logical names. */
import * as tf from "@tensorflow/tfjs";
import { Rng } from "./rng.js";

let instanceCounter = 0;

export function uniqueName(logical: string): string {
  instanceCounter += 1;
  return `${logical}#${instanceCounter}`;
}

export function silu(x: tf.Tensor): tf.Tensor {
  return tf.mul(x, tf.sigmoid(x));
}

export interface MlpSpec {
  sizes: number[]; // e.g. [2, 256, 256, 1]
  namePrefix: string; // logical prefix, e.g. "pi"
  outputScale?: number; // shrink the final layer's init (small-init policy head)
}

export class Mlp {
  readonly weights: tf.Variable[] = [];
  readonly biases: tf.Variable[] = [];
  readonly logicalNames: string[] = [];

  constructor(spec: MlpSpec, rng: Rng) {
    for (let i = 0; i < spec.sizes.length - 1; i++) {
      const fanIn = spec.sizes[i];
      const fanOut = spec.sizes[i + 1];
      const last = i === spec.sizes.length - 2;
      let scale = Math.sqrt(2.0 / fanIn); // He init for the SiLU stack
      if (last && spec.outputScale !== undefined) scale *= spec.outputScale;
      const w = tf.variable(
        tf.tensor2d(rng.normalArray(fanIn * fanOut, scale), [fanIn, fanOut]),
        true,
        uniqueName(`${spec.namePrefix}/w${i}`),
      );
      const b = tf.variable(
        tf.zeros([fanOut]), true, uniqueName(`${spec.namePrefix}/b${i}`),
      );
      this.weights.push(w);
      this.biases.push(b);
      this.logicalNames.push(`${spec.namePrefix}/w${i}`, `${spec.namePrefix}/b${i}`);
    }
  }

  /** Forward pass; hidden layers use SiLU, the output layer is linear. */
  forward(x: tf.Tensor2D): tf.Tensor2D {
    let h: tf.Tensor = x;
    const last = this.weights.length - 1;
    for (let i = 0; i <= last; i++) {
      h = tf.add(tf.matMul(h, this.weights[i]), this.biases[i]);
      if (i < last) h = silu(h);
    }
    return h as tf.Tensor2D;
  }

  get variables(): tf.Variable[] {
    const out: tf.Variable[] = [];
    for (let i = 0; i < this.weights.length; i++) {
      out.push(this.weights[i], this.biases[i]);
    }
    return out;
  }
}

export interface SerializedVariable {
  name: string; // logical name
  shape: number[];
  data: number[];
}

export function serializeVariables(
  vars: tf.Variable[], logicalNames: string[],
): SerializedVariable[] {
  if (vars.length !== logicalNames.length) {
    throw new Error("serializeVariables: names/variables length mismatch");
  }
  return vars.map((v, i) => ({
    name: logicalNames[i],
    shape: v.shape.slice(),
    data: Array.from(v.dataSync()),
  }));
}

export function restoreVariables(
  vars: tf.Variable[], logicalNames: string[], saved: SerializedVariable[],
): void {
  const byName = new Map(saved.map((s) => [s.name, s]));
  for (let i = 0; i < vars.length; i++) {
    const s = byName.get(logicalNames[i]);
    if (!s) throw new Error(`checkpoint is missing variable ${logicalNames[i]}`);
    vars[i].assign(tf.tensor(s.data, s.shape as number[]));
  }
}
