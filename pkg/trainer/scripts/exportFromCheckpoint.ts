/** Export a policy grid from a saved checkpoint without retraining.
 *
 *   npx tsx scripts/exportFromCheckpoint.ts --checkpoint runs/s0/checkpoint.json \
 *       --out runs/s0/policy.json
 */
import * as fs from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { initBackend } from "../src/backend.js";
import { exportPolicyGrid, validatePolicyDoc } from "../src/exportPolicy.js";
import { PpoAgent } from "../src/ppo.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option("checkpoint", { type: "string", demandOption: true })
    .option("out", { type: "string", demandOption: true })
    .option("horizon", { type: "number", default: 1.0 })
    .option("q-max", { type: "number", default: 40.0 })
    .option("export-nt", { type: "number", default: 100 })
    .option("export-nq", { type: "number", default: 161 })
    .strict()
    .parse();

  await initBackend();
  const agent = new PpoAgent({ horizon: argv.horizon, inventoryScale: argv["q-max"] });
  agent.restore(JSON.parse(fs.readFileSync(argv.checkpoint, "utf-8")));
  const doc = exportPolicyGrid(agent, {
    horizon: argv.horizon,
    qMax: argv["q-max"],
    nT: argv["export-nt"],
    nQ: argv["export-nq"],
    metadata: { source: "ppo-trainer", checkpoint: argv.checkpoint,
                total_steps: agent.totalEnvSteps },
  });
  validatePolicyDoc(doc);
  fs.writeFileSync(argv.out, JSON.stringify(doc) + "\n");
  console.error(`wrote ${argv.out} (checkpoint at ${agent.totalEnvSteps} env steps)`);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
