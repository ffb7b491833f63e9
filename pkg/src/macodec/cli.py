"""Command line front end.

Exit codes: 0 success, 1 usage problem, 2 file I/O failure, 3 damaged or
foreign input data, 4 violated internal invariant.
"""

from __future__ import annotations

import argparse
import sys

from . import selftest
from .codec import decode_image, encode_image
from .errors import ArmDivergenceError, FormatError
from .images import read_pgm, synthetic_image, write_pgm
from .nn import forward
from .pipeline import (
    evaluate,
    extract_records,
    read_eval_csv,
    read_macd,
    render_report,
    write_eval_csv,
    write_macd,
)
from .weights import load_weights

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None


def _add_corpus_args(p):
    p.add_argument("images", nargs="*", help="greyscale PGM files")
    p.add_argument("--synthetic", type=int, default=0, metavar="COUNT",
                   help="add COUNT generated images")
    p.add_argument("--size", type=_size, default=(64, 64), metavar="WxH",
                   help="generated image size (default 64x64)")
    p.add_argument("--seed", type=int, default=0, metavar="S",
                   help="first generator seed (default 0)")


def _load_corpus(args):
    images = [(path, read_pgm(path)) for path in args.images]
    w, h = args.size
    for i in range(args.synthetic):
        seed = args.seed + i
        images.append((f"synthetic-{w}x{h}-{seed}", synthetic_image(w, h, seed)))
    if not images:
        raise ValueError("no input images: pass PGM paths or --synthetic")
    return images


def cmd_dataset_build(args):
    records = []
    images = _load_corpus(args)
    for _, img in images:
        records.extend(extract_records(img, args.n, args.qp))
    write_macd(args.out, records, args.n, args.qp)
    print(f"records={len(records)} images={len(images)} out={args.out}")
    return EXIT_OK


def cmd_encode(args):
    img = read_pgm(args.infile)
    weights = load_weights(args.weights) if args.weights else None
    enc = encode_image(img, args.n, args.qp, weights=weights)
    with open(args.out, "wb") as f:
        f.write(enc.container)
    print(f"modes={enc.mode_bits} residual={enc.residual_bits} total={enc.total_bits}")
    return EXIT_OK


def cmd_decode(args):
    with open(args.infile, "rb") as f:
        data = f.read()
    weights = load_weights(args.weights) if args.weights else None
    dec = decode_image(data, weights=weights)
    write_pgm(args.out, dec.image)
    h, w = dec.image.shape
    print(f"width={w} height={h} blocks={dec.block_size} qp={dec.qp} model={dec.model_id}")
    return EXIT_OK


def cmd_evaluate(args):
    weights = load_weights(args.weights)
    rows, total = evaluate(_load_corpus(args), args.n, args.qp, weights)
    if args.out:
        write_eval_csv(args.out, rows, total)
    print(render_report(rows, total, fmt=args.format))
    print(f"savings={total.savings:.6f}")
    return EXIT_OK


def cmd_report(args):
    rows, total = read_eval_csv(args.infile)
    print(render_report(rows, total, fmt=args.format))
    return EXIT_OK


def cmd_forward(args):
    weights = load_weights(args.weights)
    records, n, _ = read_macd(args.data)
    if n != weights.block_size:
        raise ValueError(
            f"dataset holds {n}-blocks but weights cover {weights.block_size}-blocks"
        )
    if args.limit is not None:
        records = records[: args.limit]
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write("mode," + ",".join(f"p{i}" for i in range(35)) + "\n")
        for r in records:
            probs = forward(weights, r.context, r.mpms)
            out.write(str(r.mode) + "," + ",".join(f"{p:.9g}" for p in probs) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_selftest(args):
    failures = 0
    for name, problem in selftest.run():
        if problem is None:
            print(f"PASS {name}")
        else:
            print(f"FAIL {name}: {problem}")
            failures += 1
    return EXIT_INTERNAL if failures else EXIT_OK


def build_parser():
    parser = _Parser(prog="macodec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-build", parents=[], help="extract training records")
    _add_corpus_args(p)
    p.add_argument("--n", type=int, required=True, help="block size")
    p.add_argument("--qp", type=int, required=True, help="quantizer 0..51")
    p.add_argument("--out", required=True, help="dataset file to write")
    p.set_defaults(func=cmd_dataset_build)

    p = sub.add_parser("encode", help="compress one image")
    p.add_argument("--in", dest="infile", required=True, help="input PGM")
    p.add_argument("--out", required=True, help="container file to write")
    p.add_argument("--n", type=int, required=True, help="block size")
    p.add_argument("--qp", type=int, required=True, help="quantizer 0..51")
    p.add_argument("--weights", help="weight file; given = network arm")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a container")
    p.add_argument("--in", dest="infile", required=True, help="input container")
    p.add_argument("--out", required=True, help="output PGM")
    p.add_argument("--weights", help="weight file, required for network containers")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="compare both arms over a corpus")
    _add_corpus_args(p)
    p.add_argument("--n", type=int, required=True, help="block size")
    p.add_argument("--qp", type=int, required=True, help="quantizer 0..51")
    p.add_argument("--weights", required=True, help="weight file for the network arm")
    p.add_argument("--out", help="also write rows to this CSV")
    p.add_argument("--format", choices=("text", "markdown"), default="text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render an evaluation CSV")
    p.add_argument("--in", dest="infile", required=True, help="evaluation CSV")
    p.add_argument("--format", choices=("text", "markdown"), default="text")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("forward", help="print network probabilities for a dataset")
    p.add_argument("--weights", required=True, help="weight file")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--limit", type=int, help="only the first LIMIT records")
    p.add_argument("--out", help="CSV to write instead of stdout")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("selftest", help="run embedded consistency checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as e:
        print(f"macodec: damaged input: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ArmDivergenceError, AssertionError) as e:
        print(f"macodec: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as e:
        print(f"macodec: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"macodec: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
