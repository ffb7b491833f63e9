/** Command line front end.
 *
 * Exit codes: 0 success, 1 usage problem, 2 file I/O failure, 3 damaged
 * or foreign input data.
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { DataError, readMacd } from "./macd.js";
import { writeMacw } from "./macw.js";
import { DEFAULTS, train } from "./train.js";

const USAGE = `usage: trainer train --data <macd> --n <block size> --out <macw>
                     [--epochs E=${DEFAULTS.epochs}] [--lr R=${DEFAULTS.lr}]
                     [--batch B=${DEFAULTS.batch}] [--seed S=${DEFAULTS.seed}]
                     [--val-split F=${DEFAULTS.valSplit}] [--curve <csv>]`;

class UsageError extends Error {}

function intArg(raw: string | undefined, fallback: number, name: string): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v) || v < 0) {
    throw new UsageError(`--${name} expects a nonnegative integer, got ${raw}`);
  }
  return v;
}

function runTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      n: { type: "string" },
      out: { type: "string" },
      epochs: { type: "string" },
      lr: { type: "string" },
      batch: { type: "string" },
      seed: { type: "string" },
      "val-split": { type: "string" },
      curve: { type: "string" },
    },
  });
  if (!values.data || !values.n || !values.out) {
    throw new UsageError("--data, --n and --out are required");
  }
  const n = intArg(values.n, NaN, "n");
  const epochs = intArg(values.epochs, DEFAULTS.epochs, "epochs");
  const batch = intArg(values.batch, DEFAULTS.batch, "batch");
  const seed = intArg(values.seed, DEFAULTS.seed, "seed");
  const lr = values.lr === undefined ? DEFAULTS.lr : Number(values.lr);
  if (!(lr > 0) || !(epochs > 0) || !(batch > 0)) {
    throw new UsageError("--epochs, --lr and --batch must be positive");
  }
  const rawSplit = values["val-split"];
  const valSplit = rawSplit === undefined ? DEFAULTS.valSplit : Number(rawSplit);
  if (!(valSplit >= 0 && valSplit < 1)) {
    throw new UsageError(`--val-split expects a fraction in [0, 1), got ${rawSplit}`);
  }
  const data = readMacd(values.data);
  if (data.n !== n) {
    throw new UsageError(`dataset holds ${data.n}-blocks but --n is ${n}`);
  }
  console.log(`records=${data.count} n=${data.n} qp=${data.qp}`);
  const started = Date.now();
  const { model, curve, valCurve } = train(data, {
    epochs,
    lr,
    batch,
    seed,
    valSplit,
    onEpoch: (epoch, loss, valLoss) => {
      const secs = ((Date.now() - started) / 1000).toFixed(1);
      const val = valLoss === undefined ? "" : ` val=${valLoss.toFixed(6)}`;
      console.log(`epoch=${epoch} loss=${loss.toFixed(6)}${val} elapsed=${secs}s`);
    },
  });
  writeMacw(values.out, n, model.exportFloat32());
  console.log(`wrote ${values.out}`);
  if (values.curve) {
    const header = valCurve.length > 0 ? "epoch,loss,val_loss" : "epoch,loss";
    const rows = curve.map((loss, epoch) => {
      const val = valCurve.length > 0 ? `,${valCurve[epoch].toFixed(9)}` : "";
      return `${epoch},${loss.toFixed(9)}${val}`;
    });
    writeFileSync(values.curve, header + "\n" + rows.join("\n") + "\n");
    console.log(`wrote ${values.curve}`);
  }
  return 0;
}

export function main(argv: string[]): number {
  try {
    if (argv[0] !== "train") {
      throw new UsageError(`unknown command ${argv[0] ?? "(none)"}\n${USAGE}`);
    }
    return runTrain(argv.slice(1));
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`trainer: ${err.message}`);
      return 1;
    }
    if (err instanceof DataError) {
      console.error(`trainer: damaged input: ${err.message}`);
      return 3;
    }
    if (err instanceof Error && "code" in err) {
      const code = String((err as NodeJS.ErrnoException).code);
      console.error(`trainer: ${err.message}`);
      return code.startsWith("ERR_PARSE_ARGS") ? 1 : 2;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
