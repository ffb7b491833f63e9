/** Shared test plumbing: temp dirs, codec CLI calls, dataset slicing. */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { Dataset, readMacd } from "../src/macd.js";

export function makeTempDir(): string {
  return mkdtempSync(join(tmpdir(), "trainer-test-"));
}

export function removeDir(path: string): void {
  rmSync(path, { recursive: true, force: true });
}

/** Run the codec command line; throws with stderr attached on failure. */
export function codec(args: string[]): string {
  const run = spawnSync("macodec", args, { encoding: "utf8" });
  if (run.error) {
    throw new Error(`could not run macodec (is the codec package installed?): ${run.error}`);
  }
  if (run.status !== 0) {
    throw new Error(`macodec ${args.join(" ")} exited ${run.status}:\n${run.stderr}`);
  }
  return run.stdout;
}

/** Build a deterministic synthetic dataset through the codec CLI. */
export function buildDataset(
  dir: string,
  opts: { images: number; size: string; seed: number; n?: number; qp?: number }
): { path: string; data: Dataset } {
  const path = join(dir, `synthetic-${opts.seed}.macd`);
  codec([
    "dataset-build",
    "--synthetic",
    String(opts.images),
    "--size",
    opts.size,
    "--seed",
    String(opts.seed),
    "--n",
    String(opts.n ?? 8),
    "--qp",
    String(opts.qp ?? 32),
    "--out",
    path,
  ]);
  return { path, data: readMacd(path) };
}

/** A record subrange as its own dataset, for train/held-out splits. */
export function slice(data: Dataset, start: number, end: number): Dataset {
  const count = end - start;
  const ctxSize = 3 * data.n * data.n;
  return {
    n: data.n,
    qp: data.qp,
    count,
    modes: data.modes.subarray(start, end),
    mpms: data.mpms.subarray(start * 3, end * 3),
    ctx: data.ctx.subarray(start * ctxSize, end * ctxSize),
  };
}
