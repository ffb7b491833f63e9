"""Multi-level range coder with adaptive binary contexts.

The engine is a 32-bit carry-propagating range coder: ``low`` accumulates
the interval offset, ``range`` tracks the interval width, and one byte is
emitted (or consumed) whenever the width drops below 2**24.  Symbol
intervals come from integer frequency tables that sum to exactly 2**15,
so quantized probabilities keep at least 9 bits of headroom below the
renormalization threshold.

Interval boundaries are computed as ``range * cum // total`` (one division
per boundary rather than one per symbol), which keeps the per-symbol
length overhead negligible even for near-certain symbols.  Carries are
resolved by walking back through the already-emitted bytes; the interval
invariant guarantees the walk always terminates inside the buffer.
"""

from bisect import bisect_right
from math import log2

from .errors import CorruptStreamError, StreamExhaustedError

PROB_BITS = 15
PROB_SCALE = 1 << PROB_BITS
_HALF = PROB_SCALE >> 1
_TOP = 1 << 24
_MASK32 = (1 << 32) - 1

MODE_COUNT = 35


class FrequencyTable:
    """Integer frequency model over a fixed alphabet, total exactly 2**15.

    Every entry is at least 1, which guarantees any symbol stays decodable.
    """

    __slots__ = ("freq", "cum")

    def __init__(self, freq):
        freq = [int(f) for f in freq]
        if len(freq) < 2:
            raise ValueError("frequency table needs at least two symbols")
        if any(f < 1 for f in freq):
            raise ValueError("all frequencies must be >= 1")
        cum = [0] * (len(freq) + 1)
        for i, f in enumerate(freq):
            cum[i + 1] = cum[i] + f
        if cum[-1] != PROB_SCALE:
            raise ValueError(f"frequencies must sum to {PROB_SCALE}, got {cum[-1]}")
        self.freq = freq
        self.cum = cum

    def __len__(self):
        return len(self.freq)

    def __eq__(self, other):
        return isinstance(other, FrequencyTable) and self.freq == other.freq


def quantize_dist(p):
    """Quantize a 35-way probability vector to a FrequencyTable.

    Floors each probability at ``max(1, floor(p * 2**15))``, then settles
    the residual one unit at a time: positive residual goes to the largest
    fractional remainders, negative residual is taken from the largest
    entries (never below 1).  Ties always break toward the lower index so
    encoder and decoder build identical tables on any platform.
    """
    p = [float(x) for x in p]
    if len(p) != MODE_COUNT:
        raise ValueError(f"expected {MODE_COUNT} probabilities, got {len(p)}")
    scaled = [x * PROB_SCALE for x in p]
    freq = [max(1, int(s)) for s in scaled]
    residual = PROB_SCALE - sum(freq)
    if residual > 0:
        order = sorted(range(MODE_COUNT), key=lambda i: (-(scaled[i] - int(scaled[i])), i))
        k = 0
        while residual > 0:
            freq[order[k % MODE_COUNT]] += 1
            residual -= 1
            k += 1
    while residual < 0:
        largest = max(range(MODE_COUNT), key=lambda i: (freq[i], -i))
        if freq[largest] <= 1:
            raise AssertionError("cannot reduce below the per-symbol floor")
        freq[largest] -= 1
        residual += 1
    return FrequencyTable(freq)


def uniform_table(symbols=MODE_COUNT):
    """FrequencyTable closest to uniform over ``symbols`` entries.

    Matches quantize_dist on an exactly uniform input: the leftover units
    land on the lowest indices.
    """
    base = PROB_SCALE // symbols
    freq = [base] * symbols
    for i in range(PROB_SCALE - base * symbols):
        freq[i] += 1
    return FrequencyTable(freq)


class BinaryContext:
    """Count-based adaptive estimator for one binary decision.

    P(1) = c1 / (c0 + c1); both counts halve (ceiling, min 1) when their
    sum reaches 256, so the estimate tracks drifting sources.
    """

    __slots__ = ("c0", "c1")

    def __init__(self, c0=1, c1=1):
        if c0 < 1 or c1 < 1:
            raise ValueError("counts must be >= 1")
        self.c0 = c0
        self.c1 = c1

    def update(self, bit):
        if bit:
            self.c1 += 1
        else:
            self.c0 += 1
        if self.c0 + self.c1 >= 256:
            self.c0 = (self.c0 + 1) >> 1
            self.c1 = (self.c1 + 1) >> 1

    def split(self):
        """Quantized zero-interval width in [1, 2**15 - 1]."""
        f0 = (self.c0 << PROB_BITS) // (self.c0 + self.c1)
        return min(max(f0, 1), PROB_SCALE - 1)


class RangeEncoder:
    """Sequential arithmetic encoder; one instance per output stream."""

    def __init__(self):
        self._buf = bytearray()
        self._low = 0
        self._range = _MASK32
        self.cost_bits = 0.0

    def _encode(self, cum_lo, cum_hi, total):
        r = self._range
        lo = (r * cum_lo) // total
        hi = (r * cum_hi) // total if cum_hi != total else r
        low = self._low + lo
        if low > _MASK32:
            low &= _MASK32
            buf = self._buf
            i = len(buf) - 1
            while buf[i] == 0xFF:
                buf[i] = 0
                i -= 1
            buf[i] += 1
        r = hi - lo
        while r < _TOP:
            self._buf.append((low >> 24) & 0xFF)
            low = (low << 8) & _MASK32
            r <<= 8
        self._low = low
        self._range = r
        self.cost_bits += log2(total / (cum_hi - cum_lo))

    def encode_symbol(self, table, symbol):
        cum = table.cum
        self._encode(cum[symbol], cum[symbol + 1], cum[-1])

    def encode_bin(self, ctx, bit):
        f0 = ctx.split()
        if bit:
            self._encode(f0, PROB_SCALE, PROB_SCALE)
        else:
            self._encode(0, f0, PROB_SCALE)
        ctx.update(bit)

    def encode_bypass(self, bit):
        if bit:
            self._encode(_HALF, PROB_SCALE, PROB_SCALE)
        else:
            self._encode(0, _HALF, PROB_SCALE)

    def finish(self):
        """Flush the remaining interval state; always exactly four bytes."""
        low = self._low
        for _ in range(4):
            self._buf.append((low >> 24) & 0xFF)
            low = (low << 8) & _MASK32
        self._low = low
        return bytes(self._buf)


class RangeDecoder:
    """Mirror of RangeEncoder; must see the identical table/context sequence."""

    def __init__(self, data):
        self._data = data
        self._pos = 0
        self._low = 0
        self._range = _MASK32
        code = 0
        for _ in range(4):
            code = (code << 8) | self._next_byte()
        self._code = code

    def _next_byte(self):
        pos = self._pos
        if pos >= len(self._data):
            raise StreamExhaustedError("arithmetic stream exhausted")
        self._pos = pos + 1
        return self._data[pos]

    def _target(self, total):
        offset = (self._code - self._low) & _MASK32
        t = ((offset + 1) * total - 1) // self._range
        if t >= total:
            raise CorruptStreamError("decoded point outside the model interval")
        return t

    def _update(self, cum_lo, cum_hi, total):
        r = self._range
        lo = (r * cum_lo) // total
        hi = (r * cum_hi) // total if cum_hi != total else r
        self._low = (self._low + lo) & _MASK32
        r = hi - lo
        while r < _TOP:
            self._code = ((self._code << 8) | self._next_byte()) & _MASK32
            self._low = (self._low << 8) & _MASK32
            r <<= 8
        self._range = r

    def decode_symbol(self, table):
        cum = table.cum
        t = self._target(cum[-1])
        s = bisect_right(cum, t) - 1
        self._update(cum[s], cum[s + 1], cum[-1])
        return s

    def decode_bin(self, ctx):
        f0 = ctx.split()
        t = self._target(PROB_SCALE)
        if t < f0:
            self._update(0, f0, PROB_SCALE)
            bit = 0
        else:
            self._update(f0, PROB_SCALE, PROB_SCALE)
            bit = 1
        ctx.update(bit)
        return bit

    def decode_bypass(self):
        t = self._target(PROB_SCALE)
        if t < _HALF:
            self._update(0, _HALF, PROB_SCALE)
            return 0
        self._update(_HALF, PROB_SCALE, PROB_SCALE)
        return 1

    def consumed(self):
        return self._pos

    def assert_consumed(self):
        """Reject streams whose byte count disagrees with the decode path."""
        if self._pos != len(self._data):
            raise CorruptStreamError(
                f"stream length mismatch: consumed {self._pos} of {len(self._data)} bytes"
            )


def bit_cost(events):
    """Ideal cost in bits of a recorded event sequence.

    Each event is a ``(freq, total)`` pair: the quantized frequency the
    coder used and the table total it was drawn from.
    """
    return sum(log2(total / freq) for freq, total in events)
