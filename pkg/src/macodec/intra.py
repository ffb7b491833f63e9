"""35-mode intra prediction over previously reconstructed pixels.

Modes: 0 planar, 1 DC, 2..34 angular (2..17 horizontal, 18..34 vertical).
Prediction reads a reference set of one corner sample, 2N above samples
and 2N left samples, built with the usual substitution scan when some
neighbours fall outside the image or have not been coded yet.  No
reference smoothing or post filters are applied in any mode, so encoder
and decoder agree on predictions by construction.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

MODE_COUNT = 35
MODE_PLANAR = 0
MODE_DC = 1
MODE_HOR = 10
MODE_VER = 26

# displacement in 1/32 pixel per row (or column), modes 2..34
INTRA_PRED_ANGLE = (
    32, 26, 21, 17, 13, 9, 5, 2, 0, -2, -5, -9, -13, -17, -21, -26, -32,
    -26, -21, -17, -13, -9, -5, -2, 0, 2, 5, 9, 13, 17, 21, 26, 32,
)

# round(8192 / angle) for the negative angles, used to project the side
# reference onto the main axis
INV_ANGLE = {
    -2: -4096, -5: -1638, -9: -910, -13: -630,
    -17: -482, -21: -390, -26: -315, -32: -256,
}


class References(NamedTuple):
    """Neighbour samples for one block: corner, 2N above, 2N left."""

    corner: int
    top: np.ndarray
    left: np.ndarray


def build_references(rec, x0, y0, n):
    """Reference set for the N x N block at (x0, y0), raster coding order.

    The row above is fully coded, the row below is not, so above-right
    samples are available when inside the image while below-left samples
    never are.  Unavailable samples take the value of their predecessor
    in the scan bottom-left -> corner -> top-right; a fully unavailable
    set degrades to mid-grey.
    """
    h, w = rec.shape
    count = 4 * n + 1
    vals = np.zeros(count, dtype=np.int32)
    avail = np.zeros(count, dtype=bool)
    for pos in range(2 * n):  # left column, bottom to top
        j = 2 * n - 1 - pos
        if x0 > 0 and j < n:
            vals[pos] = rec[y0 + j, x0 - 1]
            avail[pos] = True
    if x0 > 0 and y0 > 0:
        vals[2 * n] = rec[y0 - 1, x0 - 1]
        avail[2 * n] = True
    for i in range(2 * n):  # top row, left to right
        if y0 > 0 and x0 + i < w:
            vals[2 * n + 1 + i] = rec[y0 - 1, x0 + i]
            avail[2 * n + 1 + i] = True
    if not avail.any():
        vals[:] = 128
    else:
        first = int(avail.argmax())
        vals[:first] = vals[first]
        for pos in range(first + 1, count):
            if not avail[pos]:
                vals[pos] = vals[pos - 1]
    return References(int(vals[2 * n]), vals[2 * n + 1 :], vals[:2 * n][::-1])


def _angular(corner, main, side, angle, n):
    """Directional prediction along the main axis, rows indexed by depth."""
    # logical reference index k in [-n, 2n+1], stored at ref[n + k]
    ref = np.zeros(3 * n + 2, dtype=np.int32)
    ref[n] = corner
    if angle >= 0:
        ref[n + 1 : 3 * n + 1] = main
        ref[3 * n + 1] = main[2 * n - 1]  # read only with zero weight
    else:
        ref[n + 1 : 2 * n + 1] = main[:n]
        bottom = (n * angle) >> 5
        if bottom < -1:  # rows past the first ever look left of the corner
            inv = INV_ANGLE[angle]
            for k in range(-1, bottom - 1, -1):
                proj = (k * inv + 128) >> 8
                ref[n + k] = corner if proj == 0 else side[proj - 1]
    depth = np.arange(1, n + 1, dtype=np.int32) * angle
    idx = depth >> 5
    fact = depth & 31
    cols = np.arange(n, dtype=np.int32)
    at = n + cols[None, :] + idx[:, None] + 1
    a = ref[at]
    b = ref[at + 1]
    return ((32 - fact[:, None]) * a + fact[:, None] * b + 16) >> 5


def predict(mode, refs, n):
    """Predicted N x N block as uint8; pure function of mode and refs."""
    corner, top, left = refs
    top = np.asarray(top, dtype=np.int32)
    left = np.asarray(left, dtype=np.int32)
    if not 0 <= mode < MODE_COUNT:
        raise ValueError(f"mode must be in [0, {MODE_COUNT}), got {mode}")
    if mode == MODE_PLANAR:
        shift = n.bit_length()  # log2(n) + 1
        x = np.arange(n, dtype=np.int32)
        y = np.arange(n, dtype=np.int32)
        horiz = (n - 1 - x)[None, :] * left[:n, None] + (x + 1)[None, :] * top[n]
        vert = (n - 1 - y)[:, None] * top[None, :n] + (y + 1)[:, None] * left[n]
        out = (horiz + vert + n) >> shift
    elif mode == MODE_DC:
        dc = (int(top[:n].sum()) + int(left[:n].sum()) + n) >> n.bit_length()
        out = np.full((n, n), dc, dtype=np.int32)
    elif mode >= 18:
        out = _angular(corner, top, left, INTRA_PRED_ANGLE[mode - 2], n)
    else:
        out = _angular(corner, left, top, INTRA_PRED_ANGLE[mode - 2], n).T
    return out.astype(np.uint8)


def mode_decision(block, refs, n):
    """Mode with the lowest sum of absolute differences; ties pick the
    lower mode index."""
    block = block.astype(np.int32)
    best_mode = 0
    best_cost = None
    for mode in range(MODE_COUNT):
        pred = predict(mode, refs, n).astype(np.int32)
        cost = int(np.abs(block - pred).sum())
        if best_cost is None or cost < best_cost:
            best_mode, best_cost = mode, cost
    return best_mode


def derive_mpm(left_mode, above_mode):
    """Three most probable modes from the two neighbour modes.

    A missing neighbour (outside the image) counts as DC.  Equal angular
    neighbours yield the mode plus its two circular angular neighbours;
    equal non-angular neighbours yield planar, DC, vertical.
    """
    a = MODE_DC if left_mode is None else left_mode
    b = MODE_DC if above_mode is None else above_mode
    if a == b:
        if a < 2:
            return (MODE_PLANAR, MODE_DC, MODE_VER)
        return (a, 2 + ((a - 2 + 31) % 32), 2 + ((a - 2 + 1) % 32))
    c = next(m for m in (MODE_PLANAR, MODE_DC, MODE_VER) if m not in (a, b))
    return (a, b, c)


def non_mpm_modes(mpms):
    """The 32 modes outside the most-probable set, ascending."""
    s = frozenset(mpms)
    return [m for m in range(MODE_COUNT) if m not in s]


def binarize_mode(mode, mpms):
    """Map a mode to (mpm flag, index bins).

    A hit spends one bin for the first most probable mode or two for the
    others; a miss spends five fixed-length bins, most significant first,
    indexing the ascending non-probable list.
    """
    if not 0 <= mode < MODE_COUNT:
        raise ValueError(f"mode must be in [0, {MODE_COUNT}), got {mode}")
    mpms = tuple(mpms)
    if mode in mpms:
        k = mpms.index(mode)
        return 1, ((0,) if k == 0 else (1, k - 1))
    idx = non_mpm_modes(mpms).index(mode)
    return 0, tuple((idx >> s) & 1 for s in range(4, -1, -1))


def debinarize_mode(flag, bins, mpms):
    """Inverse of binarize_mode; rejects payloads of the wrong length."""
    bins = tuple(bins)
    if flag:
        if bins == (0,):
            return mpms[0]
        if len(bins) == 2 and bins[0] == 1 and bins[1] in (0, 1):
            return mpms[1 + bins[1]]
        raise ValueError(f"bad probable-mode payload {bins}")
    if len(bins) != 5 or any(b not in (0, 1) for b in bins):
        raise ValueError(f"bad remainder payload {bins}")
    idx = 0
    for b in bins:
        idx = (idx << 1) | b
    return non_mpm_modes(mpms)[idx]
