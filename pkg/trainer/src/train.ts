/** Mini-batch Adam training loop over a dataset. */

import { Dataset } from "./macd.js";
import { Model } from "./model.js";
import { Prng } from "./prng.js";

export interface TrainOptions {
  epochs: number;
  lr: number;
  batch: number;
  seed: number;
  /** fraction of records held out for validation; 0 disables the split */
  valSplit?: number;
  /** called after every epoch; valLoss is present when a split is configured */
  onEpoch?: (epoch: number, loss: number, valLoss?: number) => void;
}

export const DEFAULTS = { epochs: 30, lr: 1e-3, batch: 64, seed: 7, valSplit: 0 };

/** Build and train a model; returns it with the per-epoch loss curves.
 *
 * Weights are drawn from Prng(seed); the batch order comes from an
 * independent Prng(seed + 1); a validation split, when requested, is cut
 * from a third stream Prng(seed + 2) so each choice stays reproducible
 * on its own.  valCurve is empty unless valSplit > 0.
 */
export function train(
  data: Dataset,
  opts: TrainOptions,
): { model: Model; curve: number[]; valCurve: number[] } {
  if (data.count === 0) {
    throw new RangeError("dataset holds no records");
  }
  const split = opts.valSplit ?? 0;
  if (!(split >= 0 && split < 1)) {
    throw new RangeError("validation split must lie in [0, 1)");
  }
  const all = new Int32Array(data.count);
  for (let i = 0; i < all.length; i++) all[i] = i;
  let trainIndices = all;
  let valIndices = new Int32Array(0);
  if (split > 0) {
    if (data.count < 2) {
      throw new RangeError("validation split needs at least 2 records");
    }
    new Prng(opts.seed + 2).shuffle(all);
    const valCount = Math.min(data.count - 1, Math.max(1, Math.floor(data.count * split)));
    valIndices = all.slice(0, valCount);
    trainIndices = all.slice(valCount);
  }
  const batch = Math.min(opts.batch, trainIndices.length);
  const model = new Model(data.n, batch);
  model.init(new Prng(opts.seed));
  const order = new Prng(opts.seed + 1);
  const indices = new Int32Array(trainIndices.length);
  const curve: number[] = [];
  const valCurve: number[] = [];
  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    indices.set(trainIndices);
    order.shuffle(indices);
    let lossSum = 0;
    let batches = 0;
    for (let from = 0; from < indices.length; from += batch) {
      const bsize = Math.min(batch, indices.length - from);
      model.forward(data, indices, from, bsize);
      lossSum += model.loss(data, indices, from, bsize);
      batches += 1;
      model.backward(data, indices, from, bsize);
      model.adamStep(opts.lr);
    }
    const loss = lossSum / batches;
    curve.push(loss);
    let valLoss: number | undefined;
    if (valIndices.length > 0) {
      valLoss = meanLossIndexed(model, data, valIndices);
      valCurve.push(valLoss);
    }
    opts.onEpoch?.(epoch, loss, valLoss);
  }
  return { model, curve, valCurve };
}

function meanLossIndexed(model: Model, data: Dataset, indices: Int32Array): number {
  let total = 0;
  for (let from = 0; from < indices.length; from += model.maxBatch) {
    const bsize = Math.min(model.maxBatch, indices.length - from);
    model.forward(data, indices, from, bsize);
    total += model.loss(data, indices, from, bsize) * bsize;
  }
  return total / indices.length;
}

/** Mean cross-entropy of a model over a whole dataset, batched. */
export function meanLoss(model: Model, data: Dataset): number {
  const indices = new Int32Array(data.count);
  for (let i = 0; i < indices.length; i++) indices[i] = i;
  return meanLossIndexed(model, data, indices);
}
