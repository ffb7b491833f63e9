/** Reader for training datasets (MACD files).
 *
 * Layout, little-endian:
 *
 *     magic   "MACD"
 *     u32     version, currently 1
 *     u8      block size N, u8 quantizer
 *     u32     record count
 *     each    u8 mode, 3 x u8 most probable modes,
 *             3 x N x N context bytes (above-left, above, left; row-major)
 *     u32     CRC-32 of every preceding byte
 */

import { readFileSync } from "node:fs";

import { crc32 } from "./crc32.js";

export const MODE_COUNT = 35;

export interface Dataset {
  n: number;
  qp: number;
  count: number;
  /** chosen mode per record */
  modes: Uint8Array;
  /** three most probable modes per record, flattened */
  mpms: Uint8Array;
  /** 3*n*n context bytes per record, flattened */
  ctx: Uint8Array;
}

export class DataError extends Error {}

export function parseMacd(data: Uint8Array): Dataset {
  if (data.length < 4) {
    throw new DataError("dataset truncated");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const stored = view.getUint32(data.length - 4, true);
  if (crc32(data.subarray(0, data.length - 4)) !== stored) {
    throw new DataError("dataset checksum mismatch");
  }
  if (data[0] !== 0x4d || data[1] !== 0x41 || data[2] !== 0x43 || data[3] !== 0x44) {
    throw new DataError("not a dataset file: bad magic");
  }
  if (data.length < 18) {
    throw new DataError("dataset truncated");
  }
  const version = view.getUint32(4, true);
  if (version !== 1) {
    throw new DataError(`unsupported dataset version ${version}`);
  }
  const n = data[8];
  const qp = data[9];
  const count = view.getUint32(10, true);
  if (n < 4 || n % 4 !== 0 || qp > 51) {
    throw new DataError(`bad dataset geometry n=${n} qp=${qp}`);
  }
  const ctxSize = 3 * n * n;
  const recSize = 4 + ctxSize;
  if (data.length - 18 !== count * recSize) {
    throw new DataError("dataset length disagrees with its record count");
  }
  const modes = new Uint8Array(count);
  const mpms = new Uint8Array(count * 3);
  const ctx = new Uint8Array(count * ctxSize);
  let pos = 14;
  for (let r = 0; r < count; r++) {
    const mode = data[pos];
    const m1 = data[pos + 1];
    const m2 = data[pos + 2];
    const m3 = data[pos + 3];
    if (mode >= MODE_COUNT || m1 >= MODE_COUNT || m2 >= MODE_COUNT || m3 >= MODE_COUNT) {
      throw new DataError("dataset contains an out-of-range mode");
    }
    modes[r] = mode;
    mpms[r * 3] = m1;
    mpms[r * 3 + 1] = m2;
    mpms[r * 3 + 2] = m3;
    ctx.set(data.subarray(pos + 4, pos + 4 + ctxSize), r * ctxSize);
    pos += recSize;
  }
  return { n, qp, count, modes, mpms, ctx };
}

export function readMacd(path: string): Dataset {
  return parseMacd(readFileSync(path));
}
