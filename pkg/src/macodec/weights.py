"""Weight container and its binary file format.

Layout (all integers little-endian):

    magic   "MACW"
    u32     version, currently 1
    u32     block size N the network was trained for
    u32     tensor count, always 8
    8 x     u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
            float32 payload in C order
    u32     CRC-32 of every preceding byte

Tensors appear in the fixed order W1 B1 W2 B2 W3 B3 W4 B4.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumError, FormatError
from .nn import HIDDEN_UNITS, MERGED_UNITS, MODE_COUNT

MAGIC = b"MACW"
VERSION = 1
TENSOR_ORDER = ("W1", "B1", "W2", "B2", "W3", "B3", "W4", "B4")


def expected_shapes(n):
    """Tensor name -> shape for a network over N x N contexts."""
    if n < 4 or n % 4:
        raise ValueError(f"block size must be a positive multiple of 4, got {n}")
    flat = 64 * (n // 4) ** 2
    return {
        "W1": (32, 3, 4, 4),
        "B1": (32,),
        "W2": (64, 32, 4, 4),
        "B2": (64,),
        "W3": (HIDDEN_UNITS, flat),
        "B3": (HIDDEN_UNITS,),
        "W4": (MODE_COUNT, MERGED_UNITS),
        "B4": (MODE_COUNT,),
    }


def _frozen_f32(a, name, shape):
    a = np.ascontiguousarray(a, dtype=np.float32)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelWeights:
    """Immutable float32 parameter set for one block size."""

    block_size: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray
    b4: np.ndarray

    def __post_init__(self):
        shapes = expected_shapes(self.block_size)
        for name in TENSOR_ORDER:
            field = name.lower()
            arr = _frozen_f32(getattr(self, field), name, shapes[name])
            object.__setattr__(self, field, arr)

    def tensors(self):
        return {name: getattr(self, name.lower()) for name in TENSOR_ORDER}


def save_weights(path, weights):
    out = bytearray()
    out += MAGIC
    out += struct.pack("<III", VERSION, weights.block_size, len(TENSOR_ORDER))
    for name, arr in weights.tensors().items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.astype("<f4").tobytes(order="C")
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    with open(path, "wb") as f:
        f.write(bytes(out))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("weight file truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_weights(path):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[-4:] != struct.pack("<I", zlib.crc32(data[:-4])):
        raise ChecksumError("weight file checksum mismatch")
    r = _Reader(data[:-4])
    if r.take(4) != MAGIC:
        raise FormatError("not a weight file: bad magic")
    version, block_size, count = r.unpack("<III")
    if version != VERSION:
        raise FormatError(f"unsupported weight file version {version}")
    if count != len(TENSOR_ORDER):
        raise FormatError(f"expected {len(TENSOR_ORDER)} tensors, header says {count}")
    try:
        shapes = expected_shapes(block_size)
    except ValueError as e:
        raise FormatError(str(e)) from None
    tensors = {}
    for expected_name in TENSOR_ORDER:
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        if name != expected_name:
            raise FormatError(f"tensor {expected_name} expected, found {name!r}")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        if dims != shapes[name]:
            raise FormatError(f"{name} has shape {dims}, expected {shapes[name]}")
        n_items = int(np.prod(dims, dtype=np.int64))
        payload = r.take(4 * n_items)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if r.pos != len(r.data):
        raise FormatError(f"{len(r.data) - r.pos} unexpected trailing bytes")
    return ModelWeights(block_size, *(tensors[n] for n in TENSOR_ORDER))
