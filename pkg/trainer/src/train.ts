/** Training entrypoint: connects to a running `flowhedge serve-env --port N`,
 * trains PPO through the progressive curriculum (or flat schedule), and
 * writes the exported policy grid, training curve, state-visit heatmap,
 * checkpoints and run metadata.
 *
 * Desk-scale default is 2M environment steps; the published experiments used
 * 100M, so expect matching structure rather than matching final polish.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { initBackend } from "./backend.js";
import { flatSchedule, progressiveSchedule, Stage } from "./curriculum.js";
import { Env, EnvConfig, RobustEnv } from "./envClient.js";
import { exportPolicyGrid, validatePolicyDoc } from "./exportPolicy.js";
import { PpoAgent, PpoConfig } from "./ppo.js";
import { StateVisitLog } from "./stateVisits.js";

export interface TrainOptions {
  host: string;
  port: number;
  totalSteps: number;
  seed: number;
  progressive: boolean;
  outDir: string;
  horizon: number;
  qMax: number;
  exportNT: number;
  exportNQ: number;
  envConfig?: Record<string, unknown>;
  includeStateOnlyRewards: boolean;
  q0Sample: "fixed" | "stationary_proxy";
  checkpointEvery: number; // rollouts between checkpoints
  ppo?: Partial<PpoConfig>; // overrides for small-scale runs and tests
  log?: (line: string) => void;
}

export const DEFAULT_TRAIN: Omit<TrainOptions, "port"> = {
  host: "127.0.0.1",
  totalSteps: 2_000_000,
  seed: 0,
  progressive: true,
  outDir: "runs/latest",
  horizon: 1.0,
  qMax: 40.0,
  exportNT: 100,
  exportNQ: 161,
  includeStateOnlyRewards: false,
  q0Sample: "stationary_proxy",
  checkpointEvery: 10,
};

export interface TrainResult {
  policyPath: string;
  curvePath: string;
  visitsPath: string;
  checkpointPath: string;
  metadataPath: string;
  finalMeanEpisodeReward: number;
}

export async function train(env: Env, opts: TrainOptions): Promise<TrainResult> {
  const log = opts.log ?? ((line: string) => console.error(line));
  log(`tf backend: ${await initBackend()}`);
  fs.mkdirSync(opts.outDir, { recursive: true });
  const agent = new PpoAgent({
    seed: opts.seed,
    horizon: opts.horizon,
    inventoryScale: opts.qMax,
    ...opts.ppo,
  });
  const schedule = opts.progressive
    ? progressiveSchedule(opts.totalSteps, opts.horizon)
    : flatSchedule(opts.totalSteps);
  const visits = new StateVisitLog(opts.horizon, opts.qMax);
  const curvePath = path.join(opts.outDir, "training_curve.csv");
  fs.writeFileSync(curvePath, "step,mean_episode_reward\n");
  const checkpointPath = path.join(opts.outDir, "checkpoint.json");

  const metadata = {
    seed: opts.seed,
    total_steps: opts.totalSteps,
    progressive: opts.progressive,
    schedule,
    ppo: { ...agent.cfg },
    env: {
      include_state_only_reward_terms: opts.includeStateOnlyRewards,
      q0_sample: opts.q0Sample,
    },
    note: "clip_ratio, gae lambda, epochs, minibatch count, target KL, action "
      + "scale and the small policy-head init are not in the published table; "
      + "values recorded here",
  };
  const metadataPath = path.join(opts.outDir, "run_metadata.json");
  fs.writeFileSync(metadataPath, JSON.stringify(metadata, null, 2) + "\n");

  let rolloutsSinceCheckpoint = 0;
  let lastMean = NaN;
  try {
    for (const stage of schedule) {
      if (stage.steps <= 0) continue;
      const cfg: EnvConfig = {
        t0: stage.t0,
        seed: opts.seed,
        include_state_only_reward_terms: opts.includeStateOnlyRewards,
        q0_sample: stage.t0 > 0 ? opts.q0Sample : "fixed",
      };
      if (opts.envConfig) cfg.config = opts.envConfig;
      await env.configure(cfg);
      log(`stage t0=${stage.t0}: ${stage.steps} steps`);

      const stageStart = agent.totalEnvSteps;
      while (agent.totalEnvSteps - stageStart < stage.steps) {
        const remaining = stage.steps - (agent.totalEnvSteps - stageStart);
        const { data, stats } = await agent.collectRollout(env, remaining);
        visits.recordAll(stats.visits);
        const update = agent.update(data);
        if (Number.isFinite(stats.meanEpisodeReward)) {
          lastMean = stats.meanEpisodeReward;
          fs.appendFileSync(
            curvePath,
            `${agent.totalEnvSteps},${stats.meanEpisodeReward}\n`,
          );
        }
        log(
          `steps=${agent.totalEnvSteps} meanEpReward=${stats.meanEpisodeReward.toFixed(1)} ` +
          `pi=${update.policyLoss.toFixed(4)} vf=${update.valueLoss.toFixed(4)} ` +
          `kl=${update.approxKl.toFixed(5)}`,
        );
        rolloutsSinceCheckpoint += 1;
        if (rolloutsSinceCheckpoint >= opts.checkpointEvery) {
          fs.writeFileSync(checkpointPath, JSON.stringify(agent.checkpoint()) + "\n");
          rolloutsSinceCheckpoint = 0;
        }
      }
    }
  } catch (err) {
    fs.writeFileSync(checkpointPath, JSON.stringify(agent.checkpoint()) + "\n");
    log(`training aborted (checkpoint saved): ${err}`);
    throw err;
  }

  fs.writeFileSync(checkpointPath, JSON.stringify(agent.checkpoint()) + "\n");
  const doc = exportPolicyGrid(agent, {
    horizon: opts.horizon,
    qMax: opts.qMax,
    nT: opts.exportNT,
    nQ: opts.exportNQ,
    metadata: { seed: opts.seed, total_steps: agent.totalEnvSteps,
                progressive: opts.progressive },
  });
  validatePolicyDoc(doc);
  const policyPath = path.join(opts.outDir, "policy.json");
  fs.writeFileSync(policyPath, JSON.stringify(doc) + "\n");
  const visitsPath = path.join(opts.outDir, "state_visits.csv");
  fs.writeFileSync(visitsPath, visits.toCsv());

  return {
    policyPath,
    curvePath,
    visitsPath,
    checkpointPath,
    metadataPath,
    finalMeanEpisodeReward: lastMean,
  };
}

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option("port", { type: "number", demandOption: true,
                      describe: "flowhedge serve-env TCP port" })
    .option("host", { type: "string", default: DEFAULT_TRAIN.host })
    .option("total-steps", { type: "number", default: DEFAULT_TRAIN.totalSteps })
    .option("seed", { type: "number", default: DEFAULT_TRAIN.seed })
    .option("progressive", { type: "boolean", default: DEFAULT_TRAIN.progressive })
    .option("out-dir", { type: "string", default: DEFAULT_TRAIN.outDir })
    .option("config", { type: "string",
                        describe: "flowhedge config JSON file to send to the env" })
    .option("q-max", { type: "number", default: DEFAULT_TRAIN.qMax })
    .option("horizon", { type: "number", default: DEFAULT_TRAIN.horizon })
    .option("export-nt", { type: "number", default: DEFAULT_TRAIN.exportNT })
    .option("export-nq", { type: "number", default: DEFAULT_TRAIN.exportNQ })
    .option("include-state-only-rewards", { type: "boolean",
                                            default: DEFAULT_TRAIN.includeStateOnlyRewards })
    .strict()
    .parse();

  const envConfig = argv.config
    ? (JSON.parse(fs.readFileSync(argv.config, "utf-8")) as Record<string, unknown>)
    : undefined;
  const env = new RobustEnv(argv.host, argv.port);
  try {
    const result = await train(env, {
      ...DEFAULT_TRAIN,
      host: argv.host,
      port: argv.port,
      totalSteps: argv["total-steps"],
      seed: argv.seed,
      progressive: argv.progressive,
      outDir: argv["out-dir"],
      horizon: argv.horizon,
      qMax: argv["q-max"],
      exportNT: argv["export-nt"],
      exportNQ: argv["export-nq"],
      includeStateOnlyRewards: argv["include-state-only-rewards"],
      envConfig,
    });
    console.error(`exported policy: ${result.policyPath}`);
  } finally {
    await env.close();
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("train.ts") || entry.endsWith("train.js")) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
