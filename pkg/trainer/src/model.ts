/** The mode-probability network and its training arithmetic.
 *
 * Architecture, mirroring the codec's inference path exactly:
 *
 *     input  3 x N x N reconstructed context planes, scaled by 1/255
 *     conv   4x4 same-size (pad 1 top/left, 2 bottom/right), 32 maps, relu
 *     pool   2x2 max
 *     conv   4x4 same-size, 64 maps, relu
 *     pool   2x2 max
 *     dense  919 units, relu
 *     concat three 35-way one-hot most-probable-mode vectors -> 1024
 *     dense  35 logits, softmax
 *
 * Everything trains in float64 so results do not depend on engine fused
 * multiply-add behavior; the exported artifact is float32.  Convolutions
 * run as im2col plus a plain matrix product, batched over records, which
 * keeps the hot loops contiguous.
 */

import { Dataset } from "./macd.js";
import { TENSOR_ORDER, Tensors, TensorName, expectedShapes } from "./macw.js";
import { Prng } from "./prng.js";

export const CLASSES = 35;
export const HIDDEN = 919;
export const MERGED = 1024;

type Params = Record<TensorName, Float64Array>;

/** C = A (M x K) times B (K x N), overwriting C (M x N).
 *
 * The kernels below process two rows of the stationary operand per pass
 * and unroll the contiguous loop so the float pipelines stay busy; this
 * is worth 2-3x over the naive loops and keeps training desk-friendly.
 */
function matmul(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  K: number,
  N: number
): void {
  C.fill(0, 0, M * N);
  for (let i = 0; i < M; i++) {
    const ai = i * K;
    const ci = i * N;
    let k = 0;
    for (; k + 1 < K; k += 2) {
      const a0 = A[ai + k];
      const a1 = A[ai + k + 1];
      if (a0 === 0 && a1 === 0) continue;
      const b0 = k * N;
      const b1 = b0 + N;
      let j = 0;
      for (; j + 3 < N; j += 4) {
        C[ci + j] += a0 * B[b0 + j] + a1 * B[b1 + j];
        C[ci + j + 1] += a0 * B[b0 + j + 1] + a1 * B[b1 + j + 1];
        C[ci + j + 2] += a0 * B[b0 + j + 2] + a1 * B[b1 + j + 2];
        C[ci + j + 3] += a0 * B[b0 + j + 3] + a1 * B[b1 + j + 3];
      }
      for (; j < N; j++) {
        C[ci + j] += a0 * B[b0 + j] + a1 * B[b1 + j];
      }
    }
    for (; k < K; k++) {
      const a = A[ai + k];
      if (a === 0) continue;
      const bk = k * N;
      for (let j = 0; j < N; j++) {
        C[ci + j] += a * B[bk + j];
      }
    }
  }
}

/** C = A (M x N) times B-transposed (B is K x N), overwriting C (M x K). */
function matmulABt(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  N: number,
  K: number
): void {
  for (let i = 0; i < M; i++) {
    const ai = i * N;
    const ci = i * K;
    for (let k = 0; k < K; k++) {
      const bk = k * N;
      let acc0 = 0;
      let acc1 = 0;
      let acc2 = 0;
      let acc3 = 0;
      let j = 0;
      for (; j + 3 < N; j += 4) {
        acc0 += A[ai + j] * B[bk + j];
        acc1 += A[ai + j + 1] * B[bk + j + 1];
        acc2 += A[ai + j + 2] * B[bk + j + 2];
        acc3 += A[ai + j + 3] * B[bk + j + 3];
      }
      for (; j < N; j++) {
        acc0 += A[ai + j] * B[bk + j];
      }
      C[ci + k] = acc0 + acc1 + acc2 + acc3;
    }
  }
}

/** C = A-transposed (A is M x K) times B (M x N), overwriting C (K x N). */
function matmulAtB(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  K: number,
  N: number
): void {
  C.fill(0, 0, K * N);
  let i = 0;
  for (; i + 1 < M; i += 2) {
    const a0i = i * K;
    const a1i = a0i + K;
    const b0 = i * N;
    const b1 = b0 + N;
    for (let k = 0; k < K; k++) {
      const a0 = A[a0i + k];
      const a1 = A[a1i + k];
      if (a0 === 0 && a1 === 0) continue;
      const ck = k * N;
      let j = 0;
      for (; j + 3 < N; j += 4) {
        C[ck + j] += a0 * B[b0 + j] + a1 * B[b1 + j];
        C[ck + j + 1] += a0 * B[b0 + j + 1] + a1 * B[b1 + j + 1];
        C[ck + j + 2] += a0 * B[b0 + j + 2] + a1 * B[b1 + j + 2];
        C[ck + j + 3] += a0 * B[b0 + j + 3] + a1 * B[b1 + j + 3];
      }
      for (; j < N; j++) {
        C[ck + j] += a0 * B[b0 + j] + a1 * B[b1 + j];
      }
    }
  }
  for (; i < M; i++) {
    const ai = i * K;
    const bi = i * N;
    for (let k = 0; k < K; k++) {
      const a = A[ai + k];
      if (a === 0) continue;
      const ck = k * N;
      for (let j = 0; j < N; j++) {
        C[ck + j] += a * B[bi + j];
      }
    }
  }
}

/** Unfold 4x4 same-size windows: X (C rows of B blocks of S*S) becomes
 * col (C*16 rows), zero-filled where a window leaves the plane. */
function im2col(
  X: Float64Array,
  col: Float64Array,
  C: number,
  S: number,
  B: number
): void {
  const cols = B * S * S;
  for (let c = 0; c < C; c++) {
    const xrow = c * cols;
    for (let i = 0; i < 4; i++) {
      for (let j = 0; j < 4; j++) {
        const krow = (c * 16 + i * 4 + j) * cols;
        for (let b = 0; b < B; b++) {
          const xb = xrow + b * S * S;
          const kb = krow + b * S * S;
          for (let y = 0; y < S; y++) {
            const yi = y + i - 1;
            const inRow = yi >= 0 && yi < S;
            const xr = xb + yi * S;
            const kr = kb + y * S;
            for (let x = 0; x < S; x++) {
              const xi = x + j - 1;
              col[kr + x] = inRow && xi >= 0 && xi < S ? X[xr + xi] : 0;
            }
          }
        }
      }
    }
  }
}

/** Scatter-add transpose of im2col, for the gradient with respect to X. */
function col2im(
  col: Float64Array,
  X: Float64Array,
  C: number,
  S: number,
  B: number
): void {
  const cols = B * S * S;
  X.fill(0, 0, C * cols);
  for (let c = 0; c < C; c++) {
    const xrow = c * cols;
    for (let i = 0; i < 4; i++) {
      for (let j = 0; j < 4; j++) {
        const krow = (c * 16 + i * 4 + j) * cols;
        for (let b = 0; b < B; b++) {
          const xb = xrow + b * S * S;
          const kb = krow + b * S * S;
          for (let y = 0; y < S; y++) {
            const yi = y + i - 1;
            if (yi < 0 || yi >= S) continue;
            const xr = xb + yi * S;
            const kr = kb + y * S;
            for (let x = 0; x < S; x++) {
              const xi = x + j - 1;
              if (xi >= 0 && xi < S) {
                X[xr + xi] += col[kr + x];
              }
            }
          }
        }
      }
    }
  }
}

function addBiasRelu(H: Float64Array, bias: Float64Array, rows: number, cols: number): void {
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    const b = bias[r];
    for (let j = 0; j < cols; j++) {
      const v = H[base + j] + b;
      H[base + j] = v > 0 ? v : 0;
    }
  }
}

function addBias(H: Float64Array, bias: Float64Array, rows: number, cols: number): void {
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    const b = bias[r];
    for (let j = 0; j < cols; j++) {
      H[base + j] += b;
    }
  }
}

/** 2x2 max pool; idx records the winning cell (first on ties) for the
 * backward scatter. */
function pool(
  X: Float64Array,
  P: Float64Array,
  idx: Int32Array,
  C: number,
  S: number,
  B: number
): void {
  const hs = S >> 1;
  for (let c = 0; c < C; c++) {
    const xrow = c * B * S * S;
    const prow = c * B * hs * hs;
    for (let b = 0; b < B; b++) {
      const xb = xrow + b * S * S;
      const pb = prow + b * hs * hs;
      for (let y = 0; y < hs; y++) {
        for (let x = 0; x < hs; x++) {
          const p0 = xb + 2 * y * S + 2 * x;
          let best = X[p0];
          let bestAt = p0;
          const c1 = p0 + 1;
          const c2 = p0 + S;
          const c3 = p0 + S + 1;
          if (X[c1] > best) {
            best = X[c1];
            bestAt = c1;
          }
          if (X[c2] > best) {
            best = X[c2];
            bestAt = c2;
          }
          if (X[c3] > best) {
            best = X[c3];
            bestAt = c3;
          }
          P[pb + y * hs + x] = best;
          idx[pb + y * hs + x] = bestAt;
        }
      }
    }
  }
}

export class Model {
  readonly n: number;
  readonly flat: number;
  readonly maxBatch: number;
  readonly params: Params;
  private readonly grads: Params;
  private readonly m: Params;
  private readonly v: Params;
  private step = 0;

  private readonly X1: Float64Array;
  private readonly col1: Float64Array;
  private readonly H1: Float64Array;
  private readonly idx1: Int32Array;
  private readonly P1: Float64Array;
  private readonly col2: Float64Array;
  private readonly H2: Float64Array;
  private readonly idx2: Int32Array;
  private readonly P2: Float64Array;
  private readonly FLAT: Float64Array;
  private readonly H3: Float64Array;
  private readonly MERG: Float64Array;
  /** logits during forward, probabilities after softmax */
  readonly PROBS: Float64Array;
  private readonly GL: Float64Array;
  private readonly dMERG: Float64Array;
  private readonly dFLAT: Float64Array;
  private readonly dP2: Float64Array;
  private readonly dH2: Float64Array;
  private readonly dcol2: Float64Array;
  private readonly dP1: Float64Array;
  private readonly dH1: Float64Array;

  constructor(n: number, maxBatch: number) {
    const shapes = expectedShapes(n);
    this.n = n;
    this.flat = shapes.W3[1];
    this.maxBatch = maxBatch;
    const alloc = (): Params => {
      const out = {} as Params;
      for (const name of TENSOR_ORDER) {
        out[name] = new Float64Array(shapes[name].reduce((a, b) => a * b, 1));
      }
      return out;
    };
    this.params = alloc();
    this.grads = alloc();
    this.m = alloc();
    this.v = alloc();

    const s1 = n;
    const s2 = n >> 1;
    const s4 = n >> 2;
    const M = maxBatch;
    this.X1 = new Float64Array(3 * M * s1 * s1);
    this.col1 = new Float64Array(48 * M * s1 * s1);
    this.H1 = new Float64Array(32 * M * s1 * s1);
    this.idx1 = new Int32Array(32 * M * s2 * s2);
    this.P1 = new Float64Array(32 * M * s2 * s2);
    this.col2 = new Float64Array(512 * M * s2 * s2);
    this.H2 = new Float64Array(64 * M * s2 * s2);
    this.idx2 = new Int32Array(64 * M * s4 * s4);
    this.P2 = new Float64Array(64 * M * s4 * s4);
    this.FLAT = new Float64Array(this.flat * M);
    this.H3 = new Float64Array(HIDDEN * M);
    this.MERG = new Float64Array(MERGED * M);
    this.PROBS = new Float64Array(CLASSES * M);
    this.GL = new Float64Array(CLASSES * M);
    this.dMERG = new Float64Array(MERGED * M);
    this.dFLAT = new Float64Array(this.flat * M);
    this.dP2 = new Float64Array(64 * M * s4 * s4);
    this.dH2 = new Float64Array(64 * M * s2 * s2);
    this.dcol2 = new Float64Array(512 * M * s2 * s2);
    this.dP1 = new Float64Array(32 * M * s2 * s2);
    this.dH1 = new Float64Array(32 * M * s1 * s1);
  }

  /** Uniform scaled initialization: each weight tensor is drawn from
   * +/- sqrt(6 / (fan_in + fan_out)) in its storage order (W1, W2, W3,
   * W4); biases start at zero.  The draw order is part of the seed
   * contract. */
  init(prng: Prng): void {
    const fans: Record<string, [number, number]> = {
      W1: [3 * 16, 32 * 16],
      W2: [32 * 16, 64 * 16],
      W3: [this.flat, HIDDEN],
      W4: [MERGED, CLASSES],
    };
    for (const name of ["W1", "W2", "W3", "W4"] as TensorName[]) {
      const [fanIn, fanOut] = fans[name];
      const limit = Math.sqrt(6 / (fanIn + fanOut));
      const w = this.params[name];
      for (let i = 0; i < w.length; i++) {
        w[i] = prng.uniform(-limit, limit);
      }
    }
    for (const name of ["B1", "B2", "B3", "B4"] as TensorName[]) {
      this.params[name].fill(0);
    }
  }

  /** Replace parameters with float32 values, e.g. a loaded artifact. */
  loadFloat32(tensors: Tensors): void {
    for (const name of TENSOR_ORDER) {
      const src = tensors[name];
      const dst = this.params[name];
      if (src.length !== dst.length) {
        throw new RangeError(`${name} holds ${src.length} values, expected ${dst.length}`);
      }
      for (let i = 0; i < src.length; i++) {
        dst[i] = src[i];
      }
    }
  }

  /** Round parameters to float32 for export. */
  exportFloat32(): Tensors {
    const out = {} as Tensors;
    for (const name of TENSOR_ORDER) {
      out[name] = Float32Array.from(this.params[name]);
    }
    return out;
  }

  /** Run the batch records indices[from .. from+bsize) through the
   * network; PROBS columns hold per-record probabilities afterwards. */
  forward(data: Dataset, indices: ArrayLike<number>, from: number, bsize: number): void {
    if (bsize < 1 || bsize > this.maxBatch) {
      throw new RangeError(`batch size ${bsize} outside 1..${this.maxBatch}`);
    }
    const n = this.n;
    const s1 = n;
    const s2 = n >> 1;
    const s4 = n >> 2;
    const B = bsize;
    const cols1 = B * s1 * s1;
    const cols2 = B * s2 * s2;
    const cols4 = B * s4 * s4;
    const p = this.params;
    const ctxSize = 3 * n * n;

    for (let b = 0; b < B; b++) {
      const rec = indices[from + b];
      const base = rec * ctxSize;
      for (let c = 0; c < 3; c++) {
        const dst = c * cols1 + b * s1 * s1;
        const src = base + c * n * n;
        for (let t = 0; t < n * n; t++) {
          this.X1[dst + t] = data.ctx[src + t] / 255;
        }
      }
    }
    im2col(this.X1, this.col1, 3, s1, B);
    matmul(p.W1, this.col1, this.H1, 32, 48, cols1);
    addBiasRelu(this.H1, p.B1, 32, cols1);
    pool(this.H1, this.P1, this.idx1, 32, s1, B);
    im2col(this.P1, this.col2, 32, s2, B);
    matmul(p.W2, this.col2, this.H2, 64, 512, cols2);
    addBiasRelu(this.H2, p.B2, 64, cols2);
    pool(this.H2, this.P2, this.idx2, 64, s2, B);
    for (let c = 0; c < 64; c++) {
      for (let b = 0; b < B; b++) {
        const src = c * cols4 + b * s4 * s4;
        for (let t = 0; t < s4 * s4; t++) {
          this.FLAT[(c * s4 * s4 + t) * B + b] = this.P2[src + t];
        }
      }
    }
    matmul(p.W3, this.FLAT, this.H3, HIDDEN, this.flat, B);
    addBias(this.H3, p.B3, HIDDEN, B);
    for (let r = 0; r < HIDDEN; r++) {
      const base = r * B;
      for (let b = 0; b < B; b++) {
        const v = this.H3[base + b];
        this.MERG[base + b] = v > 0 ? v : 0;
      }
    }
    this.MERG.fill(0, HIDDEN * B, MERGED * B);
    for (let b = 0; b < B; b++) {
      const rec = indices[from + b];
      for (let k = 0; k < 3; k++) {
        const mode = data.mpms[rec * 3 + k];
        this.MERG[(HIDDEN + k * CLASSES + mode) * B + b] = 1;
      }
    }
    matmul(p.W4, this.MERG, this.PROBS, CLASSES, MERGED, B);
    addBias(this.PROBS, p.B4, CLASSES, B);
    for (let b = 0; b < B; b++) {
      let top = -Infinity;
      for (let i = 0; i < CLASSES; i++) {
        const v = this.PROBS[i * B + b];
        if (v > top) top = v;
      }
      let sum = 0;
      for (let i = 0; i < CLASSES; i++) {
        const e = Math.exp(this.PROBS[i * B + b] - top);
        this.PROBS[i * B + b] = e;
        sum += e;
      }
      for (let i = 0; i < CLASSES; i++) {
        this.PROBS[i * B + b] /= sum;
      }
    }
  }

  /** Mean cross-entropy of the most recent forward batch. */
  loss(data: Dataset, indices: ArrayLike<number>, from: number, bsize: number): number {
    let total = 0;
    for (let b = 0; b < bsize; b++) {
      const target = data.modes[indices[from + b]];
      total += -Math.log(this.PROBS[target * bsize + b] + 1e-12);
    }
    return total / bsize;
  }

  /** Gradients for the most recent forward batch, overwriting the last
   * batch's gradients. */
  backward(data: Dataset, indices: ArrayLike<number>, from: number, bsize: number): void {
    const n = this.n;
    const s2 = n >> 1;
    const s4 = n >> 2;
    const B = bsize;
    const cols1 = B * n * n;
    const cols2 = B * s2 * s2;
    const cols4 = B * s4 * s4;
    const p = this.params;
    const g = this.grads;

    for (let i = 0; i < CLASSES; i++) {
      const base = i * B;
      for (let b = 0; b < B; b++) {
        this.GL[base + b] = this.PROBS[base + b] / B;
      }
    }
    for (let b = 0; b < B; b++) {
      const target = data.modes[indices[from + b]];
      this.GL[target * B + b] -= 1 / B;
    }

    matmulABt(this.GL, this.MERG, g.W4, CLASSES, B, MERGED);
    for (let i = 0; i < CLASSES; i++) {
      let acc = 0;
      for (let b = 0; b < B; b++) acc += this.GL[i * B + b];
      g.B4[i] = acc;
    }
    matmulAtB(p.W4, this.GL, this.dMERG, CLASSES, MERGED, B);
    for (let r = 0; r < HIDDEN; r++) {
      const base = r * B;
      for (let b = 0; b < B; b++) {
        if (this.H3[base + b] <= 0) this.dMERG[base + b] = 0;
      }
    }
    const dH3 = this.dMERG.subarray(0, HIDDEN * B);
    matmulABt(dH3, this.FLAT, g.W3, HIDDEN, B, this.flat);
    for (let r = 0; r < HIDDEN; r++) {
      let acc = 0;
      for (let b = 0; b < B; b++) acc += dH3[r * B + b];
      g.B3[r] = acc;
    }
    matmulAtB(p.W3, dH3, this.dFLAT, HIDDEN, this.flat, B);
    for (let c = 0; c < 64; c++) {
      for (let b = 0; b < B; b++) {
        const dst = c * cols4 + b * s4 * s4;
        for (let t = 0; t < s4 * s4; t++) {
          this.dP2[dst + t] = this.dFLAT[(c * s4 * s4 + t) * B + b];
        }
      }
    }
    this.dH2.fill(0, 0, 64 * cols2);
    for (let i = 0; i < 64 * cols4; i++) {
      const at = this.idx2[i];
      if (this.H2[at] > 0) this.dH2[at] += this.dP2[i];
    }
    matmulABt(this.dH2, this.col2, g.W2, 64, cols2, 512);
    for (let r = 0; r < 64; r++) {
      let acc = 0;
      const base = r * cols2;
      for (let j = 0; j < cols2; j++) acc += this.dH2[base + j];
      g.B2[r] = acc;
    }
    matmulAtB(p.W2, this.dH2, this.dcol2, 64, 512, cols2);
    col2im(this.dcol2, this.dP1, 32, s2, B);
    this.dH1.fill(0, 0, 32 * cols1);
    for (let i = 0; i < 32 * cols2; i++) {
      const at = this.idx1[i];
      if (this.H1[at] > 0) this.dH1[at] += this.dP1[i];
    }
    matmulABt(this.dH1, this.col1, g.W1, 32, cols1, 48);
    for (let r = 0; r < 32; r++) {
      let acc = 0;
      const base = r * cols1;
      for (let j = 0; j < cols1; j++) acc += this.dH1[base + j];
      g.B1[r] = acc;
    }
  }

  /** One Adam update from the current gradients. */
  adamStep(lr: number, beta1 = 0.9, beta2 = 0.999, eps = 1e-8): void {
    this.step += 1;
    const bc1 = 1 - Math.pow(beta1, this.step);
    const bc2 = 1 - Math.pow(beta2, this.step);
    for (const name of TENSOR_ORDER) {
      const w = this.params[name];
      const gr = this.grads[name];
      const m = this.m[name];
      const v = this.v[name];
      for (let i = 0; i < w.length; i++) {
        m[i] = beta1 * m[i] + (1 - beta1) * gr[i];
        v[i] = beta2 * v[i] + (1 - beta2) * gr[i] * gr[i];
        w[i] -= (lr * (m[i] / bc1)) / (Math.sqrt(v[i] / bc2) + eps);
      }
    }
  }

  /** Probabilities for a single record, e.g. for parity checks. */
  forwardOne(data: Dataset, record: number): Float64Array {
    this.forward(data, [record], 0, 1);
    return this.PROBS.slice(0, CLASSES);
  }
}
