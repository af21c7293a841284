/**
 * Flat parameter-vector export for trajectory-matching evaluation.
 *
 * Parameters are sorted by name (stable across runs of the same
 * architecture), flattened in that order, and written as float32 LE with an
 * index entry recording the dimension.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { f32le } from "./binio.js";

export interface NamedParam {
  name: string;
  values: ArrayLike<number>;
}

export interface ParamIndexEntry {
  file: string;
  dim: number;
}

const INDEX_FILE = "theta_index.json";

export function flattenSorted(params: NamedParam[]): Float64Array {
  const sorted = [...params].sort((a, b) => (a.name < b.name ? -1 : a.name > b.name ? 1 : 0));
  let dim = 0;
  for (const p of sorted) dim += p.values.length;
  const out = new Float64Array(dim);
  let off = 0;
  for (const p of sorted) {
    for (let i = 0; i < p.values.length; i++) {
      const v = p.values[i];
      if (!Number.isFinite(v)) {
        throw new Error(`parameter ${p.name}[${i}] is not finite`);
      }
      out[off++] = v;
    }
  }
  return out;
}

export function exportFlatParams(
  dir: string,
  params: NamedParam[],
  tag: string,
): ParamIndexEntry {
  fs.mkdirSync(dir, { recursive: true });
  const flat = flattenSorted(params);
  const file = `theta_${tag}.bin`;
  const tmp = path.join(dir, `${file}.tmp`);
  fs.writeFileSync(tmp, f32le(flat));
  fs.renameSync(tmp, path.join(dir, file));

  const indexPath = path.join(dir, INDEX_FILE);
  let index: { vectors: Record<string, ParamIndexEntry> } = { vectors: {} };
  if (fs.existsSync(indexPath)) {
    index = JSON.parse(fs.readFileSync(indexPath, "utf-8"));
  }
  const entry = { file, dim: flat.length };
  index.vectors[tag] = entry;
  fs.writeFileSync(indexPath, JSON.stringify(index, null, 2) + "\n");
  return entry;
}
