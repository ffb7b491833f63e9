"""Fast built-in checks against frozen expected values.

Each check exercises one load-bearing component with inputs small enough
to embed here, so an installation can vouch for itself without the test
suite or any model file.
"""

from __future__ import annotations

import zlib

import numpy as np

from .codec import decode_image, encode_image
from .images import synthetic_image
from .intra import References, derive_mpm, predict
from .rangecoder import PROB_SCALE, FrequencyTable, RangeDecoder, RangeEncoder, quantize_dist
from .transform import transform_quantize

_RC_SYMBOLS = (0, 0, 17, 0, 34, 0, 0)
_RC_HEX = "ff5623904b0000"

_PREDICT_CRC = {
    0: 0xA49DD0D7,
    1: 0x05173727,
    10: 0xEF68ED26,
    26: 0xEA8851A6,
    2: 0x1F842FF9,
    18: 0x7A779FEB,
    33: 0xE0475BE0,
}

_LEVELS_IN = (
    (30, -20, 0, 10),
    (0, 0, 50, -10),
    (20, 2, 2, 2),
    (-40, 0, 0, 0),
)
_LEVELS_OUT = (6, -3, -3, 12, 11, 8, 11, 14, -11, -6, 8, -8, 2, 11, 20, -6)


def _check_range_coder():
    freq = [1] * 35
    freq[0] = PROB_SCALE - 34
    table = FrequencyTable(freq)
    enc = RangeEncoder()
    for s in _RC_SYMBOLS:
        enc.encode_symbol(table, s)
    data = enc.finish()
    if data.hex() != _RC_HEX:
        return f"stream {data.hex()} != {_RC_HEX}"
    dec = RangeDecoder(data)
    got = tuple(dec.decode_symbol(table) for _ in _RC_SYMBOLS)
    if got != _RC_SYMBOLS:
        return f"decoded {got}"
    dec.assert_consumed()
    return None


def _check_quantizer():
    freq = quantize_dist([1.0 / 35] * 35).freq
    if sum(freq) != PROB_SCALE or freq[:8] != [937] * 8 or freq[8:] != [936] * 27:
        return f"uniform split came out as {freq[:9]}..."
    return None


def _check_prediction():
    refs = References(
        100,
        np.arange(16, dtype=np.int32) * 9 % 256,
        (np.arange(16, dtype=np.int32) * 13 + 7) % 256,
    )
    for mode, want in _PREDICT_CRC.items():
        got = zlib.crc32(predict(mode, refs, 8).tobytes())
        if got != want:
            return f"mode {mode} block crc {got:#x} != {want:#x}"
    return None


def _check_most_probable():
    cases = {
        (None, None): (0, 1, 26),
        (10, 10): (10, 9, 11),
        (2, 2): (2, 33, 3),
        (34, 34): (34, 33, 3),
        (3, 7): (3, 7, 0),
    }
    for (a, b), want in cases.items():
        if derive_mpm(a, b) != want:
            return f"neighbours {a},{b} gave {derive_mpm(a, b)}"
    return None


def _check_transform():
    levels = transform_quantize(np.array(_LEVELS_IN), 10)
    got = tuple(levels.reshape(-1).tolist())
    if got != _LEVELS_OUT:
        return f"levels {got}"
    return None


def _check_closed_loop():
    img = synthetic_image(32, 32, seed=12345)
    enc = encode_image(img, 8, 32)
    dec = decode_image(enc.container)
    if not np.array_equal(dec.image, enc.reconstruction):
        return "decode disagrees with encoder reconstruction"
    if not np.array_equal(dec.modes, enc.modes):
        return "decode recovered different modes"
    return None


CHECKS = (
    ("range-coder", _check_range_coder),
    ("distribution-quantizer", _check_quantizer),
    ("prediction", _check_prediction),
    ("most-probable-modes", _check_most_probable),
    ("transform", _check_transform),
    ("closed-loop", _check_closed_loop),
)


def run():
    """[(name, failure-or-None)] for every embedded check."""
    return [(name, fn()) for name, fn in CHECKS]
