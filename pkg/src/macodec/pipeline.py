"""Dataset extraction, evaluation runs and report rendering.

The dataset file (MACD) carries exactly what the trainer needs per block:
the chosen mode, the three most probable modes and the three context
planes.  Evaluation re-encodes each image with both arms, checks that
they made identical decisions and reports the mode-bit ratio; negative
savings mean the network arm wrote fewer bits.

Dataset layout (MACD), little-endian:

    magic   "MACD"
    u32     version, currently 1
    u8      block size N, u8 quantizer
    u32     record count
    each    u8 mode, 3 x u8 most probable modes,
            3 x N x N context bytes (above-left, above, left; row-major)
    u32     CRC-32 of every preceding byte
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .codec import analyze_image, encode_image
from .errors import ArmDivergenceError, ChecksumError, FormatError
from .transform import quant_step

MAGIC = b"MACD"
VERSION = 1

# average mode-bit change measured on the full-scale corpus at
# quantizer 32; printed beside desk-scale results for orientation
FULL_SCALE_REFERENCE = -0.099


@dataclass(frozen=True)
class TrainingRecord:
    mode: int
    mpms: tuple
    context: np.ndarray


def extract_records(img, n, qp):
    """Per-block training records in coding order."""
    return [
        TrainingRecord(info.mode, tuple(int(m) for m in info.mpms), info.context)
        for info in analyze_image(img, n, qp)
    ]


def write_macd(path, records, n, qp):
    quant_step(qp)
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IBBI", VERSION, n, qp, len(records))
    for r in records:
        if r.context.shape != (3, n, n) or r.context.dtype != np.uint8:
            raise ValueError(f"record context must be uint8 (3, {n}, {n})")
        out += struct.pack("<B3B", r.mode, *r.mpms)
        out += r.context.tobytes(order="C")
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    with open(path, "wb") as f:
        f.write(bytes(out))


def read_macd(path):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[-4:] != struct.pack("<I", zlib.crc32(data[:-4])):
        raise ChecksumError("dataset checksum mismatch")
    if data[:4] != MAGIC:
        raise FormatError("not a dataset file: bad magic")
    if len(data) < 18:
        raise FormatError("dataset truncated")
    version, n, qp, count = struct.unpack_from("<IBBI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if n < 4 or n % 4 or qp > 51:
        raise FormatError(f"bad dataset geometry n={n} qp={qp}")
    rec_size = 4 + 3 * n * n
    pos = 14
    if len(data) - 4 - pos != count * rec_size:
        raise FormatError("dataset length disagrees with its record count")
    records = []
    for _ in range(count):
        mode, m1, m2, m3 = struct.unpack_from("<B3B", data, pos)
        if mode >= 35 or any(m >= 35 for m in (m1, m2, m3)):
            raise FormatError("dataset contains an out-of-range mode")
        ctx = np.frombuffer(
            data, dtype=np.uint8, count=3 * n * n, offset=pos + 4
        ).reshape(3, n, n)
        records.append(TrainingRecord(mode, (m1, m2, m3), ctx))
        pos += rec_size
    return records, n, qp


@dataclass(frozen=True)
class ImageEval:
    name: str
    width: int
    height: int
    baseline_mode_bits: int
    network_mode_bits: int
    residual_bits: int

    @property
    def savings(self):
        # negative = the network arm wrote fewer mode bits
        if self.baseline_mode_bits == 0:
            return math.nan
        delta = self.network_mode_bits - self.baseline_mode_bits
        return delta / self.baseline_mode_bits


def evaluate_image(name, img, n, qp, weights):
    """Encode with both arms and compare their mode bits.

    The arms share every decision, so diverging mode grids or residual
    bytes mean an internal defect, not a property of the input.
    """
    base = encode_image(img, n, qp)
    net = encode_image(img, n, qp, weights=weights)
    if not np.array_equal(base.modes, net.modes):
        raise ArmDivergenceError(f"{name}: arms chose different modes")
    if base.residual_stream != net.residual_stream:
        raise ArmDivergenceError(f"{name}: arms wrote different residual bytes")
    h, w = img.shape
    return ImageEval(name, w, h, base.mode_bits, net.mode_bits, base.residual_bits)


def evaluate(named_images, n, qp, weights):
    """Rows per image plus an aggregate row over all mode bits."""
    rows = [evaluate_image(name, img, n, qp, weights) for name, img in named_images]
    if not rows:
        raise ValueError("nothing to evaluate")
    total = ImageEval(
        "TOTAL",
        0,
        0,
        sum(r.baseline_mode_bits for r in rows),
        sum(r.network_mode_bits for r in rows),
        sum(r.residual_bits for r in rows),
    )
    return rows, total


_CSV_FIELDS = (
    "image",
    "width",
    "height",
    "baseline_mode_bits",
    "network_mode_bits",
    "residual_bits",
    "savings",
)


def write_eval_csv(path, rows, total):
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(_CSV_FIELDS)
        for r in list(rows) + [total]:
            out.writerow(
                [
                    r.name,
                    r.width,
                    r.height,
                    r.baseline_mode_bits,
                    r.network_mode_bits,
                    r.residual_bits,
                    f"{r.savings:.6f}",
                ]
            )


def read_eval_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(_CSV_FIELDS):
            raise FormatError(f"{path}: not an evaluation table")
        rows = []
        for line in reader:
            if len(line) != len(_CSV_FIELDS):
                raise FormatError(f"{path}: malformed row {line!r}")
            try:
                rows.append(
                    ImageEval(line[0], *(int(v) for v in line[1:6]))
                )
            except ValueError:
                raise FormatError(f"{path}: malformed row {line!r}") from None
    if not rows or rows[-1].name != "TOTAL":
        raise FormatError(f"{path}: missing aggregate row")
    return rows[:-1], rows[-1]


def _percent(value):
    return "n/a" if math.isnan(value) else f"{value * 100:+.1f}%"


def render_report(rows, total, fmt="text"):
    """Human-readable table of an evaluation run."""
    header = ("image", "base mode bits", "net mode bits", "residual bits", "savings")
    body = [
        (r.name, str(r.baseline_mode_bits), str(r.network_mode_bits),
         str(r.residual_bits), _percent(r.savings))
        for r in list(rows) + [total]
    ]
    lines = []
    if fmt == "markdown":
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join("---" for _ in header) + "|")
        for row in body:
            lines.append("| " + " | ".join(row) + " |")
    elif fmt == "text":
        widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(header)]
        lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
        for row in body:
            lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(header))))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    lines.append("")
    lines.append(
        f"full-scale reference at quantizer 32: {FULL_SCALE_REFERENCE * 100:+.1f}% mode bits"
    )
    return "\n".join(lines)
