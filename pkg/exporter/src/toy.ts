/**
 * Toy end-to-end run: trains a tiny classifier on a bundled slice of the
 * UCI optical-digits set (8x8 grayscale, 3 classes) and exports the full
 * artifact set: a trajectory bundle, flat parameter vectors at two
 * checkpoints, and the batch-norm statistics file. Finishes in well under
 * two minutes on CPU.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";

import { exportFlatParams, NamedParam } from "./params.js";
import { ExportSession } from "./session.js";
import { BnLayerStats, writeBnStats } from "./stats.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const DATA_PATH = path.join(HERE, "..", "data", "digits_subset.json");

export interface DigitsSubset {
  source: string;
  image_shape: [number, number];
  value_range: [number, number];
  classes: number[];
  images: number[][];
  labels: number[];
}

export function loadDigits(): DigitsSubset {
  return JSON.parse(fs.readFileSync(DATA_PATH, "utf-8")) as DigitsSubset;
}

export interface ToyRunResult {
  bundleDir: string;
  thetaDir: string;
  bnStatsPath: string;
  paramTags: string[];
  epochs: number;
  numSamples: number;
  numClasses: number;
  sampleIds: string[];
  finalAccuracy: number;
}

export interface ToyRunOptions {
  epochs?: number;
  /** epochs at which flat parameter vectors are exported, tag -> epoch */
  checkpoints?: Record<string, number>;
  captureTeacher?: boolean;
}

async function namedParams(model: tf.LayersModel): Promise<NamedParam[]> {
  const out: NamedParam[] = [];
  for (const layer of model.layers) {
    for (const w of layer.weights) {
      out.push({ name: w.name, values: await w.read().data() });
    }
  }
  return out;
}

function cosineLr(epoch: number, total: number, peak = 0.05): number {
  return peak * 0.5 * (1 + Math.cos((Math.PI * epoch) / Math.max(total - 1, 1)));
}

export async function runToyTraining(
  outDir: string,
  opts: ToyRunOptions = {},
): Promise<ToyRunResult> {
  const epochs = opts.epochs ?? 16;
  const checkpoints = opts.checkpoints ?? { t: 2, tM: 4 };
  const data = loadDigits();
  const numClasses = data.classes.length;
  const numSamples = data.images.length;
  const scale = data.value_range[1];
  const sampleIds = data.labels.map((lab, i) => `digit_${lab}_${String(i).padStart(3, "0")}`);

  const xs = tf.tensor2d(
    data.images.map((img) => img.map((v) => v / scale)),
    [numSamples, data.image_shape[0] * data.image_shape[1]],
  );
  const ys = tf.oneHot(tf.tensor1d(data.labels, "int32"), numClasses);

  const model = tf.sequential({
    layers: [
      tf.layers.dense({ inputShape: [64], units: 16, activation: "relu" }),
      tf.layers.batchNormalization(),
      tf.layers.dense({ units: numClasses, activation: "softmax" }),
    ],
  });
  const optimizer = tf.train.sgd(cosineLr(0, epochs));
  model.compile({ optimizer, loss: "categoricalCrossentropy", metrics: ["accuracy"] });

  fs.mkdirSync(outDir, { recursive: true });
  const bundleDir = path.join(outDir, "traj");
  const thetaDir = path.join(outDir, "theta");
  const session = new ExportSession(bundleDir, {
    datasetId: "uci-digits-3class-subset",
    modelTag: "mlp16-bn",
    sampleIds,
    labels: data.labels,
    numClasses,
    captureTeacher: opts.captureTeacher ?? false,
    captureLr: true,
  });
  if (opts.captureTeacher) {
    // softened one-hot labels stand in for a teacher in the toy run
    const eps = 0.05;
    session.setTeacher(
      data.labels.map((lab) =>
        Array.from({ length: numClasses }, (_, c) =>
          c === lab ? 1 - eps : eps / (numClasses - 1),
        ),
      ),
    );
  }

  let finalAccuracy = 0;
  for (let epoch = 0; epoch < epochs; epoch++) {
    const lr = cosineLr(epoch, epochs);
    optimizer.setLearningRate(lr);
    const hist = await model.fit(xs, ys, { epochs: 1, batchSize: 16, verbose: 0 });
    finalAccuracy = Number(hist.history["acc"]?.[0] ?? hist.history["accuracy"]?.[0] ?? 0);

    // clean-input, inference-mode probabilities for every sample
    const probs = (await (model.predict(xs) as tf.Tensor).array()) as number[][];
    session.captureEpoch(probs, { lr });

    for (const [tag, at] of Object.entries(checkpoints)) {
      if (at === epoch + 1) {
        exportFlatParams(thetaDir, await namedParams(model), tag);
      }
    }
  }
  session.finalize();

  // batch statistics of the BN input features vs the layer's running stats
  const bnLayer = model.layers[1];
  const featModel = tf.model({ inputs: model.inputs, outputs: model.layers[0].output as tf.SymbolicTensor });
  const feats = featModel.predict(xs) as tf.Tensor;
  const { mean, variance } = tf.moments(feats, 0);
  const weights: Record<string, Float32Array> = {};
  for (const w of bnLayer.weights) {
    weights[w.name] = (await w.read().data()) as Float32Array;
  }
  const find = (part: string): number[] => {
    for (const [name, vals] of Object.entries(weights)) {
      if (name.includes(part)) return Array.from(vals);
    }
    throw new Error(`no BN weight matching ${part}`);
  };
  const layerStats: BnLayerStats = {
    name: bnLayer.name,
    mean: Array.from((await mean.data()) as Float32Array),
    variance: Array.from((await variance.data()) as Float32Array),
    runningMean: find("moving_mean"),
    runningVariance: find("moving_variance"),
  };
  const bnStatsPath = path.join(outDir, "bn_stats.json");
  writeBnStats(bnStatsPath, [layerStats]);

  return {
    bundleDir,
    thetaDir,
    bnStatsPath,
    paramTags: Object.keys(checkpoints),
    epochs,
    numSamples,
    numClasses,
    sampleIds,
    finalAccuracy,
  };
}
