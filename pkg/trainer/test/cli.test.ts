import { spawnSync } from "node:child_process";
import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { buildDataset, makeTempDir, removeDir } from "./helpers.js";

let dir: string;
let dataPath: string;

const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));

function run(args: string[]) {
  return spawnSync("node", [CLI, ...args], { encoding: "utf8" });
}

beforeAll(() => {
  dir = makeTempDir();
  dataPath = buildDataset(dir, { images: 2, size: "32x32", seed: 950 }).path;
});

afterAll(() => {
  removeDir(dir);
});

describe("command line", () => {
  it("trains and writes the artifact plus a loss curve", () => {
    const out = join(dir, "cli.macw");
    const curve = join(dir, "curve.csv");
    const res = run([
      "train",
      "--data", dataPath,
      "--n", "8",
      "--out", out,
      "--epochs", "2",
      "--curve", curve,
    ]);
    expect(res.status).toBe(0);
    expect(res.stdout).toContain("records=32");
    expect(existsSync(out)).toBe(true);
    const rows = readFileSync(curve, "utf8").trim().split("\n");
    expect(rows[0]).toBe("epoch,loss");
    expect(rows.length).toBe(3);
  });

  it("reports a validation column when a split is requested", () => {
    const out = join(dir, "split.macw");
    const curve = join(dir, "split-curve.csv");
    const res = run([
      "train",
      "--data", dataPath,
      "--n", "8",
      "--out", out,
      "--epochs", "2",
      "--val-split", "0.25",
      "--curve", curve,
    ]);
    expect(res.status).toBe(0);
    expect(res.stdout).toMatch(/epoch=0 loss=\d.*val=\d/);
    const rows = readFileSync(curve, "utf8").trim().split("\n");
    expect(rows[0]).toBe("epoch,loss,val_loss");
    expect(rows[1].split(",").length).toBe(3);
  });

  it("exits 1 on an out-of-range validation split", () => {
    const res = run([
      "train",
      "--data", dataPath,
      "--n", "8",
      "--out", join(dir, "v.macw"),
      "--val-split", "1.5",
    ]);
    expect(res.status).toBe(1);
    expect(res.stderr).toContain("val-split");
  });

  it("exits 1 on missing required options", () => {
    expect(run(["train", "--n", "8"]).status).toBe(1);
    expect(run(["train", "--data", dataPath, "--n", "8"]).status).toBe(1);
    expect(run(["frobnicate"]).status).toBe(1);
    expect(run(["train", "--data", dataPath, "--n", "8", "--out", join(dir, "x.macw"), "--bogus", "1"]).status).toBe(1);
  });

  it("exits 1 on a block-size mismatch", () => {
    const res = run(["train", "--data", dataPath, "--n", "16", "--out", join(dir, "y.macw")]);
    expect(res.status).toBe(1);
    expect(res.stderr).toContain("8-blocks");
  });

  it("exits 2 when the dataset file is missing", () => {
    const res = run(["train", "--data", join(dir, "nope.macd"), "--n", "8", "--out", join(dir, "z.macw")]);
    expect(res.status).toBe(2);
  });

  it("exits 3 on a damaged dataset", () => {
    const bytes = readFileSync(dataPath);
    bytes[bytes.length - 10] ^= 4;
    const damaged = join(dir, "damaged.macd");
    writeFileSync(damaged, bytes);
    const res = run(["train", "--data", damaged, "--n", "8", "--out", join(dir, "w.macw")]);
    expect(res.status).toBe(3);
    expect(res.stderr).toContain("damaged input");
  });
});
