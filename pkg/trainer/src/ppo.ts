/** Proximal policy optimisation with a diagonal-Gaussian policy over trading
 * speeds.  Hyperparameters follow the experiment table: two 256-unit SiLU
 * hidden layers for both nets, Adam at 1e-3, discount 0.99, entropy 0.01,
 * value coefficient 0.5, gradient clip 1.0, batches of 4000 steps.  Choices
 * the table omits (clip 0.2, GAE lambda 0.95, 10 epochs over 4 minibatches)
 * are recorded in the run metadata.
 */
import * as tf from "@tensorflow/tfjs";
import { Env, EnvProtocolError, Observation } from "./envClient.js";
import { computeGae, normalize } from "./gae.js";
import {
  Mlp,
  restoreVariables,
  serializeVariables,
  SerializedVariable,
  uniqueName,
} from "./nets.js";
import { Rng } from "./rng.js";

export interface PpoConfig {
  horizon: number; // episode horizon T (days), for time normalisation
  inventoryScale: number; // observations use q / inventoryScale
  actionScale: number; // env speed = actionScale * normalised policy output
  rewardScale: number; // rewards are scaled inside the agent only
  hidden: number[];
  learningRate: number;
  gamma: number;
  lambda: number;
  clipRatio: number;
  entropyCoef: number;
  valueCoef: number;
  maxGradNorm: number;
  batchSize: number;
  epochs: number;
  minibatches: number;
  initialLogStd: number; // log-std in normalised action units
  targetKl: number; // early-stop the update epochs beyond 1.5x this
  seed: number;
}

export const DEFAULT_PPO: PpoConfig = {
  horizon: 1.0,
  inventoryScale: 40.0,
  actionScale: 100.0,
  rewardScale: 1e-4,
  hidden: [256, 256],
  learningRate: 1e-3,
  gamma: 0.99,
  lambda: 0.95,
  clipRatio: 0.2,
  entropyCoef: 0.01,
  valueCoef: 0.5,
  maxGradNorm: 1.0,
  batchSize: 4000,
  epochs: 10,
  minibatches: 4,
  initialLogStd: Math.log(0.3),
  targetKl: 0.03,
  seed: 0,
};

export interface RolloutStats {
  steps: number;
  episodes: number;
  meanEpisodeReward: number;
  episodeRewards: number[];
  visits: Array<{ t: number; q: number }>;
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  approxKl: number;
}

const LOG_2PI = Math.log(2.0 * Math.PI);

export class PpoAgent {
  readonly cfg: PpoConfig;
  readonly actor: Mlp;
  readonly critic: Mlp;
  readonly logStd: tf.Variable;
  private optimizer: tf.Optimizer;
  private rng: Rng;
  totalEnvSteps = 0;

  constructor(cfg: Partial<PpoConfig> = {}) {
    this.cfg = { ...DEFAULT_PPO, ...cfg };
    this.rng = new Rng(this.cfg.seed);
    // small-init policy head: the initial policy trades ~nothing instead of
    // blowing up the inventory while the value net is still uninformative
    this.actor = new Mlp(
      { sizes: [2, ...this.cfg.hidden, 1], namePrefix: "pi", outputScale: 0.01 },
      this.rng,
    );
    this.critic = new Mlp({ sizes: [2, ...this.cfg.hidden, 1], namePrefix: "vf" }, this.rng);
    this.logStd = tf.variable(
      tf.scalar(this.cfg.initialLogStd), true, uniqueName("logstd"),
    );
    this.optimizer = tf.train.adam(this.cfg.learningRate);
  }

  get variables(): tf.Variable[] {
    return [...this.actor.variables, ...this.critic.variables, this.logStd];
  }

  get logicalNames(): string[] {
    return [...this.actor.logicalNames, ...this.critic.logicalNames, "logstd"];
  }

  obsToArray(obs: Observation): [number, number] {
    return [obs.t / this.cfg.horizon, obs.q / this.cfg.inventoryScale];
  }

  /** Deterministic policy action (scaled mean) for one observation. */
  meanAction(obs: Observation): number {
    return tf.tidy(() => {
      const x = tf.tensor2d([this.obsToArray(obs)]);
      return this.actor.forward(x).dataSync()[0] * this.cfg.actionScale;
    });
  }

  /** Deterministic policy actions for a batch of [tNorm, qNorm] rows. */
  meanActions(rows: number[][]): Float32Array {
    return tf.tidy(() => {
      const out = this.actor.forward(tf.tensor2d(rows)).dataSync() as Float32Array;
      for (let i = 0; i < out.length; i++) out[i] *= this.cfg.actionScale;
      return out;
    });
  }

  private policyStats(obs: Observation): { mean: number; value: number } {
    return tf.tidy(() => {
      const x = tf.tensor2d([this.obsToArray(obs)]);
      const mean = this.actor.forward(x).dataSync()[0];
      const value = this.critic.forward(x).dataSync()[0];
      return { mean, value };
    });
  }

  /** Collect a rollout of min(cfg.batchSize, maxSteps) environment steps. */
  async collectRollout(
    env: Env,
    maxSteps = Number.POSITIVE_INFINITY,
  ): Promise<{ data: RolloutData; stats: RolloutStats }> {
    const cfg = this.cfg;
    const target = Math.min(cfg.batchSize, maxSteps);
    const obsBuf: number[][] = [];
    const actBuf: number[] = [];
    const logpBuf: number[] = [];
    const rewBuf: number[] = [];
    const doneBuf: boolean[] = [];
    const valBuf: number[] = [];
    const episodeRewards: number[] = [];
    const visits: Array<{ t: number; q: number }> = [];

    let obs = await this.safeReset(env);
    let episodeReward = 0;
    const std = Math.exp(this.logStd.dataSync()[0]);

    while (obsBuf.length < target) {
      const { mean, value } = this.policyStats(obs);
      const z = this.rng.normal();
      const u = mean + std * z; // normalised action; the env sees it scaled
      const logp = -0.5 * (z * z + LOG_2PI) - Math.log(std);

      let result;
      try {
        result = await env.step(u * cfg.actionScale);
      } catch (err) {
        if (err instanceof EnvProtocolError) {
          // interrupted episode (e.g. reconnect): drop its partial tail
          this.dropPartialEpisode(obsBuf, actBuf, logpBuf, rewBuf, doneBuf, valBuf);
          obs = await this.safeReset(env);
          episodeReward = 0;
          continue;
        }
        throw err;
      }

      visits.push({ t: obs.t, q: obs.q });
      obsBuf.push(this.obsToArray(obs));
      actBuf.push(u);
      logpBuf.push(logp);
      rewBuf.push(result.reward * cfg.rewardScale);
      doneBuf.push(result.done);
      valBuf.push(value);
      episodeReward += result.reward;
      this.totalEnvSteps += 1;

      if (result.done) {
        episodeRewards.push(episodeReward);
        episodeReward = 0;
        obs = await this.safeReset(env);
      } else {
        obs = result.obs;
      }
    }
    // bootstrap value for a truncated final episode
    valBuf.push(doneBuf[doneBuf.length - 1] ? 0 : this.policyStats(obs).value);

    const meanEpisodeReward =
      episodeRewards.length > 0
        ? episodeRewards.reduce((a, b) => a + b, 0) / episodeRewards.length
        : NaN;
    return {
      data: { obs: obsBuf, actions: actBuf, logp: logpBuf, rewards: rewBuf,
              dones: doneBuf, values: valBuf },
      stats: {
        steps: obsBuf.length,
        episodes: episodeRewards.length,
        meanEpisodeReward,
        episodeRewards,
        visits,
      },
    };
  }

  private async safeReset(env: Env): Promise<Observation> {
    return env.reset();
  }

  private dropPartialEpisode(
    obs: number[][], act: number[], logp: number[], rew: number[],
    done: boolean[], val: number[],
  ): void {
    while (done.length > 0 && !done[done.length - 1]) {
      obs.pop(); act.pop(); logp.pop(); rew.pop(); done.pop(); val.pop();
    }
  }

  /** One PPO update over a collected rollout. */
  update(data: RolloutData): UpdateStats {
    const cfg = this.cfg;
    const n = data.actions.length;
    const { advantages, returns } = computeGae(
      data.rewards, data.values, data.dones, cfg.gamma, cfg.lambda,
    );
    const advNorm = normalize(advantages);

    const obsT = tf.tensor2d(data.obs);
    const actT = tf.tensor2d(data.actions, [n, 1]);
    const logpT = tf.tensor2d(data.logp, [n, 1]);
    const advT = tf.tensor2d(advNorm, [n, 1]);
    const retT = tf.tensor2d(returns, [n, 1]);

    let last: UpdateStats = { policyLoss: 0, valueLoss: 0, entropy: 0, approxKl: 0 };
    const mbSize = Math.max(1, Math.floor(n / cfg.minibatches));
    let stop = false;
    for (let epoch = 0; epoch < cfg.epochs && !stop; epoch++) {
      const perm = this.rng.permutation(n);
      for (let mb = 0; mb < cfg.minibatches; mb++) {
        const chunk = perm.slice(mb * mbSize, (mb + 1) * mbSize);
        if (chunk.length === 0) continue;
        const idx = tf.tensor1d(Array.from(chunk), "int32");
        const mbObs = tf.gather(obsT, idx) as tf.Tensor2D;
        const mbAct = tf.gather(actT, idx);
        const mbLogp = tf.gather(logpT, idx);
        const mbAdv = tf.gather(advT, idx);
        const mbRet = tf.gather(retT, idx);
        last = this.updateMinibatch(mbObs, mbAct, mbLogp, mbAdv, mbRet);
        tf.dispose([idx, mbObs, mbAct, mbLogp, mbAdv, mbRet]);
        if (last.approxKl > 1.5 * cfg.targetKl) {
          stop = true; // keep the update inside the trust region
          break;
        }
      }
    }
    tf.dispose([obsT, actT, logpT, advT, retT]);
    return last;
  }

  private updateMinibatch(
    obs: tf.Tensor2D,
    act: tf.Tensor,
    logpOld: tf.Tensor,
    adv: tf.Tensor,
    ret: tf.Tensor,
  ): UpdateStats {
    const cfg = this.cfg;
    const stats = { policyLoss: 0, valueLoss: 0, entropy: 0, approxKl: 0 };

    const lossFn = (): tf.Scalar =>
      tf.tidy(() => {
        const mean = this.actor.forward(obs);
        const logStd = this.logStd;
        const std = tf.exp(logStd);
        const z = tf.div(tf.sub(act, mean), std);
        const logp = tf.sub(
          tf.mul(-0.5, tf.add(tf.square(z), LOG_2PI)),
          logStd,
        );
        const ratio = tf.exp(tf.sub(logp, logpOld));
        const clipped = tf.clipByValue(ratio, 1 - cfg.clipRatio, 1 + cfg.clipRatio);
        const surrogate = tf.minimum(tf.mul(ratio, adv), tf.mul(clipped, adv));
        const policyLoss = tf.neg(tf.mean(surrogate));
        const entropy = tf.add(tf.mul(0.5, 1.0 + LOG_2PI), logStd); // per-dim Gaussian
        const value = this.critic.forward(obs);
        const valueLoss = tf.mean(tf.square(tf.sub(value, ret)));

        stats.policyLoss = policyLoss.dataSync()[0];
        stats.valueLoss = valueLoss.dataSync()[0];
        stats.entropy = entropy.dataSync()[0];
        stats.approxKl = tf.mean(tf.sub(logpOld, logp)).dataSync()[0];

        return tf.add(
          tf.sub(policyLoss, tf.mul(cfg.entropyCoef, entropy)),
          tf.mul(cfg.valueCoef, valueLoss),
        ) as tf.Scalar;
      });

    const result = tf.variableGrads(lossFn, this.variables);
    const clipped = clipByGlobalNorm(result.grads, cfg.maxGradNorm);
    this.optimizer.applyGradients(clipped);
    tf.dispose(result.value);
    tf.dispose(result.grads);
    tf.dispose(clipped);
    return stats;
  }

  checkpoint(): { variables: SerializedVariable[]; totalEnvSteps: number } {
    return {
      variables: serializeVariables(this.variables, this.logicalNames),
      totalEnvSteps: this.totalEnvSteps,
    };
  }

  restore(saved: { variables: SerializedVariable[]; totalEnvSteps?: number }): void {
    restoreVariables(this.variables, this.logicalNames, saved.variables);
    this.totalEnvSteps = saved.totalEnvSteps ?? 0;
  }
}

export interface RolloutData {
  obs: number[][];
  actions: number[];
  logp: number[];
  rewards: number[];
  dones: boolean[];
  values: number[];
}

function clipByGlobalNorm(
  grads: tf.NamedTensorMap,
  maxNorm: number,
): tf.NamedTensorMap {
  const names = Object.keys(grads);
  const norm = Math.sqrt(
    names.reduce((acc, k) => acc + tf.sum(tf.square(grads[k])).dataSync()[0], 0),
  );
  const scale = norm > maxNorm ? maxNorm / norm : 1.0;
  const out: tf.NamedTensorMap = {};
  for (const k of names) out[k] = tf.mul(grads[k], scale);
  return out;
}
