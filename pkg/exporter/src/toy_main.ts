/**
 * End-to-end script: train the toy classifier, export every artifact, and
 * validate/score the bundle through the ddkit CLI.
 *
 *   node dist/toy_main.js [out_dir]
 */

import * as path from "node:path";

import { ddkitOk, recordGenError } from "./ddkit.js";
import { runToyTraining } from "./toy.js";

async function main(): Promise<void> {
  const outDir = process.argv[2] ?? "toy_run";
  const run = await runToyTraining(outDir, { epochs: 16 });
  console.log(`trained ${run.epochs} epochs, final accuracy ${run.finalAccuracy.toFixed(3)}`);

  const validate = ddkitOk("validate", run.bundleDir);
  console.log(`ddkit validate: ${validate.stdout.trim()}`);

  const scoresCsv = path.join(outDir, "el2n.csv");
  ddkitOk("score", "--traj", run.bundleDir, "--method", "el2n", "--out", scoresCsv);
  console.log(`wrote ${scoresCsv}`);

  const cadCsv = path.join(outDir, "cad.csv");
  ddkitOk(
    "score", "--traj", run.bundleDir, "--method", "cad",
    "--J", "6", "--W", "2", "--K", String(run.epochs - 2), "--out", cadCsv,
  );
  console.log(`wrote ${cadCsv}`);

  const tm = ddkitOk(
    "objective", "tm",
    "--start", path.join(run.thetaDir, "theta_t.bin"),
    "--expert", path.join(run.thetaDir, "theta_tM.bin"),
    "--student", path.join(run.thetaDir, "theta_tM.bin"),
  );
  console.log(`tm loss with student == expert endpoint: ${tm.stdout.trim()}`);

  const bn = ddkitOk("objective", "bn", "--stats", run.bnStatsPath);
  console.log(`bn matching loss: ${bn.stdout.trim()}`);

  recordGenError(
    path.join(outDir, "errors.csv"),
    "toy-full-set",
    Math.max(0, Math.min(1, 1 - run.finalAccuracy)),
    run.numSamples,
  );
  console.log(`recorded generalization error in ${path.join(outDir, "errors.csv")}`);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
