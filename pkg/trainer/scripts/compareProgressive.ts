/** Qualitative comparison of progressive vs non-progressive training at equal
 * step budgets across several seeds (not part of CI: outcomes are seed
 * dependent).  Usage:
 *
 *   flowhedge serve-env --port 9000 --config <psi0 config>
 *   npx tsx scripts/compareProgressive.ts --port 9000 --steps 60000 --seeds 3
 */
import * as fs from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { RobustEnv } from "../src/envClient.js";
import { train } from "../src/train.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option("port", { type: "number", demandOption: true })
    .option("host", { type: "string", default: "127.0.0.1" })
    .option("steps", { type: "number", default: 60_000 })
    .option("seeds", { type: "number", default: 3 })
    .option("out-dir", { type: "string", default: "runs/progressive-compare" })
    .strict()
    .parse();

  let progressiveWins = 0;
  for (let seed = 0; seed < argv.seeds; seed++) {
    const scores: Record<string, number> = {};
    for (const progressive of [true, false]) {
      const label = progressive ? "progressive" : "flat";
      const outDir = `${argv["out-dir"]}/seed${seed}-${label}`;
      const env = new RobustEnv(argv.host, argv.port);
      const result = await train(env, {
        host: argv.host,
        port: argv.port,
        totalSteps: argv.steps,
        seed,
        progressive,
        outDir,
        horizon: 1.0,
        qMax: 40.0,
        exportNT: 20,
        exportNQ: 41,
        includeStateOnlyRewards: false,
        q0Sample: "stationary_proxy",
        checkpointEvery: 20,
        log: () => {},
      });
      await env.close();
      // score: mean episode reward over the final quarter of the curve
      const rows = fs
        .readFileSync(result.curvePath, "utf-8")
        .trim()
        .split("\n")
        .slice(1)
        .map((line) => Number(line.split(",")[1]));
      const tail = rows.slice(Math.floor(rows.length * 0.75));
      scores[label] = tail.reduce((a, b) => a + b, 0) / tail.length;
    }
    const win = scores.progressive > scores.flat;
    progressiveWins += win ? 1 : 0;
    console.log(
      `seed ${seed}: progressive=${scores.progressive.toFixed(1)} ` +
      `flat=${scores.flat.toFixed(1)} -> ${win ? "progressive" : "flat"}`,
    );
  }
  console.log(`progressive wins ${progressiveWins}/${argv.seeds}`);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
