import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { crc32 } from "../src/crc32.js";
import { DataError, parseMacd } from "../src/macd.js";
import { TENSOR_ORDER, Tensors, encodeMacw, expectedShapes, parseMacw } from "../src/macw.js";
import { Prng } from "../src/prng.js";
import { buildDataset, makeTempDir, removeDir } from "./helpers.js";

let dir: string;

beforeAll(() => {
  dir = makeTempDir();
});

afterAll(() => {
  removeDir(dir);
});

describe("crc32", () => {
  it("matches the reference check value", () => {
    const bytes = new TextEncoder().encode("123456789");
    expect(crc32(bytes)).toBe(0xcbf43926);
  });

  it("matches zlib on the empty input", () => {
    expect(crc32(new Uint8Array(0))).toBe(0);
  });
});

function randomTensors(n: number, seed: number): Tensors {
  const prng = new Prng(seed);
  const shapes = expectedShapes(n);
  const out = {} as Tensors;
  for (const name of TENSOR_ORDER) {
    const size = shapes[name].reduce((a, b) => a * b, 1);
    const t = new Float32Array(size);
    for (let i = 0; i < size; i++) {
      t[i] = Math.fround(prng.uniform(-2, 2));
    }
    out[name] = t;
  }
  return out;
}

describe("weight files", () => {
  it("round-trips every float32 value and the block size", () => {
    const tensors = randomTensors(8, 41);
    const back = parseMacw(encodeMacw(8, tensors));
    expect(back.n).toBe(8);
    for (const name of TENSOR_ORDER) {
      expect(back.tensors[name]).toEqual(tensors[name]);
    }
  });

  it("supports other block sizes through the shape table", () => {
    const tensors = randomTensors(16, 42);
    const back = parseMacw(encodeMacw(16, tensors));
    expect(back.tensors.W3.length).toBe(919 * 64 * 16);
  });

  it("rejects a flipped payload byte", () => {
    const data = encodeMacw(8, randomTensors(8, 43));
    data[200] ^= 0x40;
    expect(() => parseMacw(data)).toThrow(DataError);
  });

  it("rejects truncation", () => {
    const data = encodeMacw(8, randomTensors(8, 44));
    expect(() => parseMacw(data.subarray(0, data.length - 9))).toThrow(DataError);
  });

  it("rejects tensors of the wrong size before writing", () => {
    const tensors = randomTensors(8, 45);
    tensors.B4 = new Float32Array(34);
    expect(() => encodeMacw(8, tensors)).toThrow(RangeError);
  });
});

describe("dataset files", () => {
  it("parses a codec-built dataset with matching geometry", () => {
    const { data } = buildDataset(dir, { images: 2, size: "32x32", seed: 700 });
    expect(data.n).toBe(8);
    expect(data.qp).toBe(32);
    expect(data.count).toBe(2 * 16);
    expect(data.ctx.length).toBe(data.count * 3 * 64);
    for (let r = 0; r < data.count; r++) {
      expect(data.modes[r]).toBeLessThan(35);
      const m = [data.mpms[r * 3], data.mpms[r * 3 + 1], data.mpms[r * 3 + 2]];
      expect(new Set(m).size).toBe(3);
    }
  });

  it("rejects a flipped context byte", () => {
    const { path } = buildDataset(dir, { images: 1, size: "16x16", seed: 701 });
    const data = readFileSync(path);
    data[data.length - 30] ^= 1;
    const copy = join(dir, "corrupt.macd");
    writeFileSync(copy, data);
    expect(() => parseMacd(readFileSync(copy))).toThrow(DataError);
  });

  it("rejects truncation", () => {
    const { path } = buildDataset(dir, { images: 1, size: "16x16", seed: 702 });
    const data = readFileSync(path);
    expect(() => parseMacd(data.subarray(0, data.length - 1))).toThrow(DataError);
  });
});
