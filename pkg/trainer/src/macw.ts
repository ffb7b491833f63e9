/** Writer and reader for weight files (MACW).
 *
 * Layout, little-endian:
 *
 *     magic   "MACW"
 *     u32     version, currently 1
 *     u32     block size N
 *     u32     tensor count, currently 8
 *     each    u16 name length, ascii name, u8 rank, rank x u32 dims,
 *             float32 payload in C order
 *     u32     CRC-32 of every preceding byte
 *
 * Tensor order is fixed: W1 B1 W2 B2 W3 B3 W4 B4.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { crc32 } from "./crc32.js";
import { DataError } from "./macd.js";

export const TENSOR_ORDER = ["W1", "B1", "W2", "B2", "W3", "B3", "W4", "B4"] as const;
export type TensorName = (typeof TENSOR_ORDER)[number];
export type Tensors = Record<TensorName, Float32Array>;

export function expectedShapes(n: number): Record<TensorName, number[]> {
  if (n < 4 || n % 4 !== 0) {
    throw new RangeError(`block size must be a positive multiple of 4, got ${n}`);
  }
  const flat = 64 * (n / 4) * (n / 4);
  return {
    W1: [32, 3, 4, 4],
    B1: [32],
    W2: [64, 32, 4, 4],
    B2: [64],
    W3: [919, flat],
    B3: [919],
    W4: [35, 1024],
    B4: [35],
  };
}

function sizeOf(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function encodeMacw(n: number, tensors: Tensors): Uint8Array {
  const shapes = expectedShapes(n);
  const chunks: Uint8Array[] = [];
  const head = new Uint8Array(16);
  const hv = new DataView(head.buffer);
  head.set([0x4d, 0x41, 0x43, 0x57]);
  hv.setUint32(4, 1, true);
  hv.setUint32(8, n, true);
  hv.setUint32(12, TENSOR_ORDER.length, true);
  chunks.push(head);
  for (const name of TENSOR_ORDER) {
    const shape = shapes[name];
    const values = tensors[name];
    if (values.length !== sizeOf(shape)) {
      throw new RangeError(
        `${name} holds ${values.length} values, shape ${shape.join("x")} needs ${sizeOf(shape)}`
      );
    }
    const header = new Uint8Array(2 + name.length + 1 + 4 * shape.length);
    const dv = new DataView(header.buffer);
    dv.setUint16(0, name.length, true);
    for (let i = 0; i < name.length; i++) {
      header[2 + i] = name.charCodeAt(i);
    }
    header[2 + name.length] = shape.length;
    shape.forEach((d, i) => dv.setUint32(2 + name.length + 1 + 4 * i, d, true));
    chunks.push(header);
    const payload = new Uint8Array(values.length * 4);
    const pv = new DataView(payload.buffer);
    values.forEach((v, i) => pv.setFloat32(i * 4, v, true));
    chunks.push(payload);
  }
  const bodyLen = chunks.reduce((a, c) => a + c.length, 0);
  const out = new Uint8Array(bodyLen + 4);
  let pos = 0;
  for (const c of chunks) {
    out.set(c, pos);
    pos += c.length;
  }
  new DataView(out.buffer).setUint32(bodyLen, crc32(out.subarray(0, bodyLen)), true);
  return out;
}

export function writeMacw(path: string, n: number, tensors: Tensors): void {
  writeFileSync(path, encodeMacw(n, tensors));
}

export function parseMacw(data: Uint8Array): { n: number; tensors: Tensors } {
  if (data.length < 4) {
    throw new DataError("weight file truncated");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (crc32(data.subarray(0, data.length - 4)) !== view.getUint32(data.length - 4, true)) {
    throw new DataError("weight file checksum mismatch");
  }
  if (data[0] !== 0x4d || data[1] !== 0x41 || data[2] !== 0x43 || data[3] !== 0x57) {
    throw new DataError("not a weight file: bad magic");
  }
  if (data.length < 16) {
    throw new DataError("weight file truncated");
  }
  const version = view.getUint32(4, true);
  if (version !== 1) {
    throw new DataError(`unsupported weight file version ${version}`);
  }
  const n = view.getUint32(8, true);
  const count = view.getUint32(12, true);
  if (count !== TENSOR_ORDER.length) {
    throw new DataError(`expected ${TENSOR_ORDER.length} tensors, file has ${count}`);
  }
  const shapes = expectedShapes(n);
  const tensors = {} as Tensors;
  let pos = 16;
  for (const name of TENSOR_ORDER) {
    const nameLen = view.getUint16(pos, true);
    pos += 2;
    let got = "";
    for (let i = 0; i < nameLen; i++) {
      got += String.fromCharCode(data[pos + i]);
    }
    pos += nameLen;
    if (got !== name) {
      throw new DataError(`expected tensor ${name}, file has ${got}`);
    }
    const rank = data[pos];
    pos += 1;
    const dims: number[] = [];
    for (let i = 0; i < rank; i++) {
      dims.push(view.getUint32(pos, true));
      pos += 4;
    }
    const want = shapes[name];
    if (dims.length !== want.length || dims.some((d, i) => d !== want[i])) {
      throw new DataError(`${name} has shape ${dims.join("x")}, expected ${want.join("x")}`);
    }
    const size = sizeOf(want);
    const values = new Float32Array(size);
    for (let i = 0; i < size; i++) {
      values[i] = view.getFloat32(pos + i * 4, true);
    }
    pos += size * 4;
    tensors[name] = values;
  }
  if (pos !== data.length - 4) {
    throw new DataError("weight file has trailing bytes");
  }
  return { n, tensors };
}

export function readMacw(path: string): { n: number; tensors: Tensors } {
  return parseMacw(readFileSync(path));
}
