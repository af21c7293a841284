/** Batch-norm statistics and feature-batch JSON writers (objective inputs). */

import * as fs from "node:fs";

export interface BnLayerStats {
  name: string;
  mean: number[];
  variance: number[];
  runningMean: number[];
  runningVariance: number[];
}

export function writeBnStats(filePath: string, layers: BnLayerStats[]): void {
  for (const l of layers) {
    const dims = new Set([
      l.mean.length,
      l.variance.length,
      l.runningMean.length,
      l.runningVariance.length,
    ]);
    if (dims.size !== 1) {
      throw new Error(`layer ${l.name}: statistic vector lengths differ`);
    }
  }
  const obj = {
    layers: layers.map((l) => ({
      name: l.name,
      mean: l.mean,
      var: l.variance,
      running_mean: l.runningMean,
      running_var: l.runningVariance,
    })),
  };
  fs.writeFileSync(filePath, JSON.stringify(obj, null, 2) + "\n");
}

export interface FeatureBatchExport {
  side: "real" | "synthetic";
  tag: string;
  embeddings: number[][];
}

export function writeFeatureBatches(filePath: string, batches: FeatureBatchExport[]): void {
  for (const b of batches) {
    if (b.embeddings.length === 0) {
      throw new Error(`batch ${b.tag} (${b.side}) is empty`);
    }
  }
  fs.writeFileSync(filePath, JSON.stringify({ batches }, null, 2) + "\n");
}
