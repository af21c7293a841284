/**
 * Thin wrapper around the ddkit command line, the only interface through
 * which the exporter talks to the toolkit. Override the command with
 * DDKIT_CMD (default: "python3 -m ddkit").
 */

import { spawnSync } from "node:child_process";

export interface DdkitResult {
  code: number;
  stdout: string;
  stderr: string;
}

function command(): string[] {
  const cmd = process.env.DDKIT_CMD ?? "python3 -m ddkit";
  return cmd.split(" ").filter((s) => s.length > 0);
}

export function ddkit(...args: string[]): DdkitResult {
  const [bin, ...base] = command();
  const proc = spawnSync(bin, [...base, ...args], { encoding: "utf-8" });
  if (proc.error) {
    throw proc.error;
  }
  return { code: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
}

export function ddkitOk(...args: string[]): DdkitResult {
  const res = ddkit(...args);
  if (res.code !== 0) {
    throw new Error(`ddkit ${args.join(" ")} exited ${res.code}: ${res.stderr}`);
  }
  return res;
}

/** Record one generalization-error measurement in the shared lookup table. */
export function recordGenError(
  store: string,
  subsetId: string,
  genError: number,
  subsetSize: number,
): void {
  ddkitOk(
    "error-table",
    "--store", store,
    "--subset-id", subsetId,
    "--gen-error", String(genError),
    "--subset-size", String(subsetSize),
  );
}
