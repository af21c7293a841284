/**
 * Export session: instruments a training loop and writes a trajectory bundle.
 *
 * Call captureEpoch once per epoch with the model's clean-input softmax
 * probabilities; each call appends one [sample][class] slab to probs.bin.
 * finalize() writes labels, ids, optional teacher/lr side channels, and the
 * checksummed manifest. The output passes `ddkit validate` as-is.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { f32le, u32le } from "./binio.js";
import { fnv1a64 } from "./fnv.js";

export const ROW_SUM_TOL = 1e-4;
export const FORMAT_VERSION = 1;

export interface SessionOptions {
  datasetId: string;
  modelTag: string;
  sampleIds: string[];
  labels: number[];
  numClasses: number;
  /** record fixed teacher soft labels (supplied via setTeacher) */
  captureTeacher?: boolean;
  /** record the per-epoch learning rate passed to captureEpoch */
  captureLr?: boolean;
}

export interface EpochCapture {
  lr?: number;
}

function writeAtomic(filePath: string, data: Uint8Array | string): void {
  const tmp = `${filePath}.${process.pid}.tmp`;
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, filePath);
}

function validateRows(rows: ArrayLike<number>[], numClasses: number, what: string): void {
  for (let n = 0; n < rows.length; n++) {
    const row = rows[n];
    if (row.length !== numClasses) {
      throw new Error(`${what} row ${n}: ${row.length} entries, expected ${numClasses}`);
    }
    let sum = 0;
    for (let c = 0; c < row.length; c++) {
      const v = row[c];
      if (!Number.isFinite(v) || v < 0 || v > 1) {
        throw new Error(`${what} row ${n}: entry ${v} outside [0, 1]`);
      }
      sum += v;
    }
    if (Math.abs(sum - 1) > ROW_SUM_TOL) {
      throw new Error(`${what} row ${n}: sum ${sum} deviates from 1 beyond ${ROW_SUM_TOL}`);
    }
  }
}

export class ExportSession {
  readonly outDir: string;
  readonly datasetId: string;
  readonly modelTag: string;
  readonly numSamples: number;
  readonly numClasses: number;
  epochsCaptured = 0;

  private readonly sampleIds: string[];
  private readonly labels: number[];
  private readonly captureTeacher: boolean;
  private readonly captureLr: boolean;
  private teacher: number[][] | null = null;
  private readonly lrs: number[] = [];
  private probsDigestParts: Uint8Array[] = [];
  private finalized = false;

  constructor(outDir: string, opts: SessionOptions) {
    if (opts.sampleIds.length !== opts.labels.length) {
      throw new Error("sampleIds and labels lengths differ");
    }
    if (new Set(opts.sampleIds).size !== opts.sampleIds.length) {
      throw new Error("sample ids are not unique");
    }
    for (const lab of opts.labels) {
      if (!Number.isInteger(lab) || lab < 0 || lab >= opts.numClasses) {
        throw new Error(`label ${lab} outside [0, ${opts.numClasses})`);
      }
    }
    this.outDir = outDir;
    this.datasetId = opts.datasetId;
    this.modelTag = opts.modelTag;
    this.sampleIds = [...opts.sampleIds];
    this.labels = [...opts.labels];
    this.numSamples = opts.sampleIds.length;
    this.numClasses = opts.numClasses;
    this.captureTeacher = opts.captureTeacher ?? false;
    this.captureLr = opts.captureLr ?? false;
    fs.mkdirSync(outDir, { recursive: true });
    fs.writeFileSync(path.join(outDir, "probs.bin"), new Uint8Array(0));
  }

  /** Fixed per-sample target distributions (soft labels from a teacher). */
  setTeacher(teacherProbs: number[][]): void {
    if (!this.captureTeacher) {
      throw new Error("session was created with captureTeacher=false");
    }
    if (teacherProbs.length !== this.numSamples) {
      throw new Error(
        `teacher has ${teacherProbs.length} rows, expected ${this.numSamples}`,
      );
    }
    validateRows(teacherProbs, this.numClasses, "teacher");
    this.teacher = teacherProbs.map((r) => [...r]);
  }

  captureEpoch(probs: ArrayLike<number>[], opts: EpochCapture = {}): void {
    if (this.finalized) {
      throw new Error("session already finalized");
    }
    if (probs.length !== this.numSamples) {
      throw new Error(
        `row-count drift: epoch ${this.epochsCaptured} has ${probs.length} rows, ` +
          `session tracks ${this.numSamples} samples`,
      );
    }
    validateRows(probs, this.numClasses, `epoch ${this.epochsCaptured}`);
    if (this.captureLr) {
      const lr = opts.lr;
      if (lr === undefined || !Number.isFinite(lr) || lr < 0) {
        throw new Error("captureLr sessions need a non-negative lr every epoch");
      }
      this.lrs.push(lr);
    }
    const flat = new Float64Array(this.numSamples * this.numClasses);
    for (let n = 0; n < this.numSamples; n++) {
      for (let c = 0; c < this.numClasses; c++) {
        flat[n * this.numClasses + c] = probs[n][c];
      }
    }
    const slab = f32le(flat);
    fs.appendFileSync(path.join(this.outDir, "probs.bin"), slab);
    this.probsDigestParts.push(slab);
    this.epochsCaptured += 1;
  }

  /** Write the remaining files plus the manifest; returns the bundle dir. */
  finalize(): string {
    if (this.finalized) {
      throw new Error("session already finalized");
    }
    if (this.epochsCaptured === 0) {
      throw new Error("no epochs captured");
    }
    if (this.captureTeacher && this.teacher === null) {
      throw new Error("captureTeacher=true but setTeacher was never called");
    }

    const files: Record<string, string> = {
      probs: "probs.bin",
      labels: "labels.bin",
      ids: "ids.txt",
    };
    const payload: Record<string, Uint8Array> = {
      labels: u32le(this.labels),
      ids: new TextEncoder().encode(this.sampleIds.join("\n") + "\n"),
    };
    if (this.teacher !== null) {
      files.teacher = "teacher.bin";
      payload.teacher = f32le(this.teacher.flat());
    }
    if (this.captureLr) {
      files.lr = "lr.bin";
      payload.lr = f32le(this.lrs);
    }
    for (const [name, data] of Object.entries(payload)) {
      writeAtomic(path.join(this.outDir, files[name]), data);
    }

    const probsAll = new Uint8Array(
      this.probsDigestParts.reduce((s, p) => s + p.length, 0),
    );
    let off = 0;
    for (const part of this.probsDigestParts) {
      probsAll.set(part, off);
      off += part.length;
    }
    const checksums: Record<string, string> = { probs: fnv1a64(probsAll) };
    for (const [name, data] of Object.entries(payload)) {
      checksums[name] = fnv1a64(data);
    }

    const manifest = {
      format_version: FORMAT_VERSION,
      E: this.epochsCaptured,
      N: this.numSamples,
      C: this.numClasses,
      endianness: "little",
      dtype: "float32",
      has_teacher: this.teacher !== null,
      files,
      checksums,
    };
    writeAtomic(
      path.join(this.outDir, "manifest.json"),
      JSON.stringify(manifest, null, 2) + "\n",
    );
    this.finalized = true;
    return this.outDir;
  }
}
