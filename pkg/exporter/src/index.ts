export { fnv1a64, fnv1a64String } from "./fnv.js";
export { f32le, u32le, readF32le } from "./binio.js";
export { ExportSession, ROW_SUM_TOL, FORMAT_VERSION } from "./session.js";
export type { SessionOptions, EpochCapture } from "./session.js";
export { exportFlatParams, flattenSorted } from "./params.js";
export type { NamedParam, ParamIndexEntry } from "./params.js";
export { writeBnStats, writeFeatureBatches } from "./stats.js";
export type { BnLayerStats, FeatureBatchExport } from "./stats.js";
export { ddkit, ddkitOk, recordGenError } from "./ddkit.js";
export { loadDigits, runToyTraining } from "./toy.js";
export type { ToyRunResult, ToyRunOptions, DigitsSubset } from "./toy.js";
