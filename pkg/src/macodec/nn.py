"""Pure numpy inference for the mode-probability network.

The network maps a three-plane causal context patch plus the three most
probable modes to a 35-way distribution:

    conv 4x4/32 -> relu -> maxpool 2x2
    conv 4x4/64 -> relu -> maxpool 2x2
    flatten -> dense 919 -> relu
    concat three 35-way one-hots -> dense 35 -> softmax

Everything runs in float32 with no framework dependency so the decoder
can reproduce the encoder's probabilities bit for bit.
"""

from __future__ import annotations

import numpy as np

MODE_COUNT = 35
HIDDEN_UNITS = 919
MERGED_UNITS = HIDDEN_UNITS + 3 * MODE_COUNT  # 1024


def normalize_context(ctx):
    """Map uint8 pixel planes (3, N, N) to float32 in [0, 1]."""
    ctx = np.asarray(ctx)
    if ctx.ndim != 3 or ctx.shape[0] != 3 or ctx.shape[1] != ctx.shape[2]:
        raise ValueError(f"context must be (3, N, N), got {ctx.shape}")
    return ctx.astype(np.float32) / np.float32(255.0)


def conv2d_same(x, w, b):
    """2-D convolution, stride 1, output size equals input size.

    x: (C_in, H, W) float32, w: (C_out, C_in, kh, kw), b: (C_out,).
    Even kernels pad one less on the leading edge (top/left) than on the
    trailing edge, matching the convention the weights were trained under.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    w = np.ascontiguousarray(w, dtype=np.float32)
    kh, kw = w.shape[2], w.shape[3]
    top, left = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (top, kh - 1 - top), (left, kw - 1 - left)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    # einsum keeps the accumulation order fixed, independent of BLAS
    out = np.einsum("chwij,ocij->ohw", win, w, dtype=np.float32)
    return out + b.astype(np.float32)[:, None, None]


def relu(x):
    return np.maximum(x, np.float32(0.0))


def maxpool2(x):
    """2x2 max pooling with stride 2 over (C, H, W); H and W must be even."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even spatial dims, got {x.shape}")
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def dense(x, w, b):
    """Affine layer: w (out, in) @ x (in,) + b (out,), float32 throughout."""
    return (w.astype(np.float32) @ x.astype(np.float32)) + b.astype(np.float32)


def softmax(z):
    """Stable softmax over the final logits.

    The exp/normalize tail runs in float64 so the returned float32 vector
    sums to 1 within 1e-6 even for extreme logits.
    """
    z = np.asarray(z, dtype=np.float32)
    e = np.exp((z - z.max()).astype(np.float64))
    return (e / e.sum()).astype(np.float32)


def one_hot(k, n=MODE_COUNT):
    if not 0 <= k < n:
        raise ValueError(f"index {k} outside [0, {n})")
    v = np.zeros(n, dtype=np.float32)
    v[k] = 1.0
    return v


def forward(weights, ctx, mpms):
    """Probability vector (35,) float32 for one block.

    ctx: uint8 planes (3, N, N) in the order above-left, above, left.
    mpms: the three most probable modes, most likely first.
    Deterministic and side-effect free: equal inputs give equal bytes.
    """
    if len(mpms) != 3:
        raise ValueError("exactly three most probable modes required")
    x = normalize_context(ctx)
    if x.shape[1] != weights.block_size:
        raise ValueError(
            f"context is {x.shape[1]}x{x.shape[1]} but weights expect "
            f"{weights.block_size}x{weights.block_size}"
        )
    x = maxpool2(relu(conv2d_same(x, weights.w1, weights.b1)))
    x = maxpool2(relu(conv2d_same(x, weights.w2, weights.b2)))
    x = relu(dense(x.reshape(-1), weights.w3, weights.b3))
    merged = np.concatenate([x] + [one_hot(int(m)) for m in mpms])
    return softmax(dense(merged, weights.w4, weights.b4))


def cross_entropy(p, k):
    """Negative natural log of the probability assigned to the true mode."""
    return float(-np.log(np.float64(p[k])))
