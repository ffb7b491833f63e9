"""Whole-image coding: mode decisions, two mode-coding arms, residuals.

Every block is predicted from reconstructed neighbours, its mode chosen
by lowest distortion, its residual transform-coded.  The mode itself is
written either by the neighbour-context arm (most-probable-mode flag and
index, adaptive flag contexts) or by the network arm (a 35-way quantized
distribution fed straight to the range coder).  Both arms make identical
decisions, so their residual streams match byte for byte.

Container layout (MACS), little-endian:

    magic   "MACS"
    u32     version, currently 1
    u8      model id: 0 neighbour-context, 1 network
    u16     width, u16 height
    u8      block size, u8 quantizer
    u32     mode stream length, then its bytes
    u32     residual stream length, then its bytes
    u32     CRC-32 of every preceding byte
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumError, CorruptStreamError, FormatError
from .intra import (
    binarize_mode,
    build_references,
    debinarize_mode,
    derive_mpm,
    mode_decision,
    predict,
)
from .nn import forward
from .rangecoder import BinaryContext, RangeDecoder, RangeEncoder, quantize_dist
from .transform import dequantize_inverse, quant_step, reconstruct, transform_quantize

MAGIC = b"MACS"
VERSION = 1
MODEL_BASELINE = 0
MODEL_NETWORK = 1

_LEVEL_CTX_COUNT = 16
_PREFIX_LIMIT = 32  # real magnitudes stay far below 2^32


def gather_context(rec, x0, y0, n):
    """Reconstructed planes above-left, above, left of the block, each
    N x N; planes outside the image are flat mid-grey."""
    ctx = np.full((3, n, n), 128, dtype=np.uint8)
    if y0 >= n and x0 >= n:
        ctx[0] = rec[y0 - n : y0, x0 - n : x0]
    if y0 >= n:
        ctx[1] = rec[y0 - n : y0, x0 : x0 + n]
    if x0 >= n:
        ctx[2] = rec[y0 : y0 + n, x0 - n : x0]
    return ctx


@dataclass(frozen=True)
class BlockInfo:
    """One block's shared coding decisions, identical across both arms."""

    bx: int
    by: int
    x0: int
    y0: int
    mode: int
    mpms: tuple
    context: np.ndarray
    levels: np.ndarray


def _check_geometry(w, h, n, qp):
    quant_step(qp)
    if n < 4 or n % 4:
        raise ValueError(f"block size must be a positive multiple of 4, got {n}")
    if w % n or h % n or not w or not h:
        raise ValueError(f"image {w}x{h} is not a multiple of the {n}-block grid")
    if w > 0xFFFF or h > 0xFFFF:
        raise ValueError(f"image {w}x{h} exceeds the container's 16-bit dimensions")


def analyze_image(img, n, qp, rec_out=None):
    """Yield per-block decisions in coding order.

    This is the arm-independent half of the encoder: reference build,
    mode decision, most-probable-mode derivation, context planes for the
    network, quantized residual levels, reconstruction.  Pass an (H, W)
    uint8 buffer as rec_out to keep the final reconstruction.
    """
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 image")
    h, w = img.shape
    _check_geometry(w, h, n, qp)
    rec = np.zeros((h, w), dtype=np.uint8) if rec_out is None else rec_out
    modes = {}
    for by in range(h // n):
        for bx in range(w // n):
            x0, y0 = bx * n, by * n
            refs = build_references(rec, x0, y0, n)
            block = img[y0 : y0 + n, x0 : x0 + n]
            mode = mode_decision(block, refs, n)
            mpms = derive_mpm(modes.get((bx - 1, by)), modes.get((bx, by - 1)))
            modes[(bx, by)] = mode
            context = gather_context(rec, x0, y0, n)
            pred = predict(mode, refs, n)
            levels = transform_quantize(
                block.astype(np.int32) - pred.astype(np.int32), qp
            )
            rec[y0 : y0 + n, x0 : x0 + n] = reconstruct(
                pred, dequantize_inverse(levels, qp)
            )
            yield BlockInfo(bx, by, x0, y0, mode, mpms, context, levels)


def _encode_magnitude(enc, v, ctxs):
    # order-0 exponential Golomb: unary prefix selects the bit length,
    # prefix bins adapt per position, suffix bins are raw
    m = (v + 1).bit_length() - 1
    for i in range(m):
        enc.encode_bin(ctxs[min(i, _LEVEL_CTX_COUNT - 1)], 0)
    enc.encode_bin(ctxs[min(m, _LEVEL_CTX_COUNT - 1)], 1)
    for s in range(m - 1, -1, -1):
        enc.encode_bypass(((v + 1) >> s) & 1)


def _decode_magnitude(dec, ctxs):
    m = 0
    while dec.decode_bin(ctxs[min(m, _LEVEL_CTX_COUNT - 1)]) == 0:
        m += 1
        if m > _PREFIX_LIMIT:
            raise CorruptStreamError("magnitude prefix exceeds any real level")
    v = 1
    for _ in range(m):
        v = (v << 1) | dec.decode_bypass()
    return v - 1


def _encode_levels(enc, levels, ctxs):
    for v in levels.reshape(-1).tolist():
        _encode_magnitude(enc, abs(v), ctxs)
        if v:
            enc.encode_bypass(1 if v < 0 else 0)


def _decode_levels(dec, n, ctxs):
    out = np.zeros(n * n, dtype=np.int32)
    for i in range(n * n):
        mag = _decode_magnitude(dec, ctxs)
        if mag and dec.decode_bypass():
            mag = -mag
        out[i] = mag
    return out.reshape(n, n)


@dataclass(frozen=True)
class EncodeResult:
    container: bytes
    mode_stream: bytes
    residual_stream: bytes
    modes: np.ndarray
    reconstruction: np.ndarray
    mode_bits: int
    residual_bits: int

    @property
    def total_bits(self):
        return self.mode_bits + self.residual_bits


def encode_image(img, n, qp, weights=None):
    """Encode one image; the arm is picked by whether weights are given."""
    if weights is not None and weights.block_size != n:
        raise ValueError(
            f"weights cover {weights.block_size}-blocks, asked to encode {n}-blocks"
        )
    img = np.asarray(img)
    mode_enc = RangeEncoder()
    res_enc = RangeEncoder()
    flag_ctxs = [BinaryContext() for _ in range(3)]
    level_ctxs = [BinaryContext() for _ in range(_LEVEL_CTX_COUNT)]
    flags = {}
    mode_rows = {}
    rec = np.zeros(img.shape, dtype=np.uint8)
    for info in analyze_image(img, n, qp, rec_out=rec):
        if weights is None:
            flag, bins = binarize_mode(info.mode, info.mpms)
            ctx_idx = flags.get((info.bx - 1, info.by), 0) + flags.get(
                (info.bx, info.by - 1), 0
            )
            mode_enc.encode_bin(flag_ctxs[ctx_idx], flag)
            for b in bins:
                mode_enc.encode_bypass(b)
            flags[(info.bx, info.by)] = flag
        else:
            probs = forward(weights, info.context, info.mpms)
            mode_enc.encode_symbol(quantize_dist(probs), info.mode)
        _encode_levels(res_enc, info.levels, level_ctxs)
        mode_rows.setdefault(info.by, {})[info.bx] = info.mode
    h, w = img.shape
    modes = np.array(
        [[mode_rows[by][bx] for bx in range(w // n)] for by in range(h // n)],
        dtype=np.int32,
    )
    mode_stream = mode_enc.finish()
    res_stream = res_enc.finish()
    model_id = MODEL_BASELINE if weights is None else MODEL_NETWORK
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IBHHBB", VERSION, model_id, w, h, n, qp)
    out += struct.pack("<I", len(mode_stream)) + mode_stream
    out += struct.pack("<I", len(res_stream)) + res_stream
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return EncodeResult(
        bytes(out),
        mode_stream,
        res_stream,
        modes,
        rec,
        len(mode_stream) * 8,
        len(res_stream) * 8,
    )


@dataclass(frozen=True)
class DecodeResult:
    image: np.ndarray
    modes: np.ndarray
    model_id: int
    block_size: int
    qp: int


def parse_container(data):
    """Split a container into header fields and streams, verifying CRC."""
    if len(data) < 4 or data[-4:] != struct.pack("<I", zlib.crc32(data[:-4])):
        raise ChecksumError("container checksum mismatch")
    if data[:4] != MAGIC:
        raise FormatError("not a coded-image container: bad magic")
    try:
        version, model_id, w, h, n, qp = struct.unpack_from("<IBHHBB", data, 4)
        pos = 15
        (mode_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        mode_stream = data[pos : pos + mode_len]
        pos += mode_len
        (res_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        res_stream = data[pos : pos + res_len]
        pos += res_len
    except struct.error:
        raise FormatError("container truncated") from None
    if len(mode_stream) != mode_len or len(res_stream) != res_len:
        raise FormatError("container truncated")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if model_id not in (MODEL_BASELINE, MODEL_NETWORK):
        raise FormatError(f"unknown model id {model_id}")
    if pos != len(data) - 4:
        raise FormatError(f"{len(data) - 4 - pos} unexpected trailing bytes")
    try:
        _check_geometry(w, h, n, qp)
    except ValueError as e:
        raise FormatError(str(e)) from None
    return model_id, w, h, n, qp, mode_stream, res_stream


def decode_image(data, weights=None):
    """Decode a container back to the encoder's reconstruction."""
    model_id, w, h, n, qp, mode_stream, res_stream = parse_container(data)
    if model_id == MODEL_NETWORK:
        if weights is None:
            raise ValueError("this container needs network weights to decode")
        if weights.block_size != n:
            raise ValueError(
                f"weights cover {weights.block_size}-blocks, container uses {n}"
            )
    mode_dec = RangeDecoder(mode_stream)
    res_dec = RangeDecoder(res_stream)
    flag_ctxs = [BinaryContext() for _ in range(3)]
    level_ctxs = [BinaryContext() for _ in range(_LEVEL_CTX_COUNT)]
    rec = np.zeros((h, w), dtype=np.uint8)
    modes = np.zeros((h // n, w // n), dtype=np.int32)
    flags = {}
    for by in range(h // n):
        for bx in range(w // n):
            x0, y0 = bx * n, by * n
            refs = build_references(rec, x0, y0, n)
            left = int(modes[by, bx - 1]) if bx else None
            above = int(modes[by - 1, bx]) if by else None
            mpms = derive_mpm(left, above)
            if model_id == MODEL_BASELINE:
                ctx_idx = flags.get((bx - 1, by), 0) + flags.get((bx, by - 1), 0)
                flag = mode_dec.decode_bin(flag_ctxs[ctx_idx])
                if flag:
                    first = mode_dec.decode_bypass()
                    bins = (0,) if first == 0 else (1, mode_dec.decode_bypass())
                else:
                    bins = tuple(mode_dec.decode_bypass() for _ in range(5))
                mode = debinarize_mode(flag, bins, mpms)
                flags[(bx, by)] = flag
            else:
                probs = forward(weights, gather_context(rec, x0, y0, n), mpms)
                mode = mode_dec.decode_symbol(quantize_dist(probs))
            modes[by, bx] = mode
            pred = predict(mode, refs, n)
            levels = _decode_levels(res_dec, n, level_ctxs)
            rec[y0 : y0 + n, x0 : x0 + n] = reconstruct(
                pred, dequantize_inverse(levels, qp)
            )
    mode_dec.assert_consumed()
    res_dec.assert_consumed()
    return DecodeResult(rec, modes, model_id, n, qp)
