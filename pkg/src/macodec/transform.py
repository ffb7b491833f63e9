"""Residual transform, scalar quantization and reconstruction.

The residual of each block is sent through an orthonormal 2-D DCT and
divided by a step that doubles every six quantizer steps.  Levels round
half away from zero so the mapping has no bias toward either sign.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

QP_MAX = 51


def quant_step(qp):
    if not 0 <= qp <= QP_MAX:
        raise ValueError(f"quantizer must be in [0, {QP_MAX}], got {qp}")
    return 2.0 ** ((qp - 4) / 6.0)


def transform_quantize(residual, qp):
    """Integer levels for one block residual (int array, any sign)."""
    coeff = dctn(residual.astype(np.float64), norm="ortho")
    scaled = np.abs(coeff) / quant_step(qp) + 0.5
    return (np.sign(coeff) * np.floor(scaled)).astype(np.int32)


def dequantize_inverse(levels, qp):
    """Float residual reconstructed from levels; both sides run this."""
    return idctn(levels.astype(np.float64) * quant_step(qp), norm="ortho")


def reconstruct(pred, inv_residual):
    """Clip prediction plus residual back to 8-bit samples."""
    s = pred.astype(np.float64) + inv_residual
    return np.clip(np.floor(s + 0.5), 0, 255).astype(np.uint8)
