"""8-bit greyscale image I/O and a seeded synthetic generator.

Images travel as binary PGM (P5, maxval 255).  The generator layers
directional sine textures over a smooth random base so a corpus contains
flat regions, gradients and oriented edges in controlled proportions.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def write_pgm(path, img):
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 image")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _tokens(data):
    """Header tokens of a PGM, skipping whitespace and # comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise FormatError("truncated image header")
        yield data[start:pos], pos


def read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    tok = _tokens(data)
    try:
        for _ in range(4):
            fields.append(next(tok))
    except FormatError:
        raise FormatError(f"{path}: truncated image header") from None
    (magic, _), (ws, _), (hs, _), (ms, after) = fields
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary greyscale image")
    try:
        w, h, maxval = int(ws), int(hs), int(ms)
    except ValueError:
        raise FormatError(f"{path}: malformed image header") from None
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: bad dimensions {w}x{h}")
    raster = data[after + 1 : after + 1 + w * h]
    if len(raster) != w * h:
        raise FormatError(f"{path}: raster shorter than {w}x{h}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def synthetic_image(width, height, seed):
    """Deterministic test image: smooth base, oriented textures, mild noise."""
    rng = np.random.RandomState(seed)
    gh, gw = 5, 5
    grid = rng.uniform(40.0, 216.0, size=(gh, gw))
    gy = np.linspace(0.0, gh - 1.0, height)
    gx = np.linspace(0.0, gw - 1.0, width)
    rows = np.array([np.interp(gx, np.arange(gw), grid[r]) for r in range(gh)])
    img = np.array([np.interp(gy, np.arange(gh), rows[:, c]) for c in range(width)]).T
    for _ in range(int(rng.randint(4, 9))):
        x0 = int(rng.randint(0, width))
        y0 = int(rng.randint(0, height))
        x1 = min(width, x0 + int(rng.randint(width // 4, width // 2 + 1)))
        y1 = min(height, y0 + int(rng.randint(height // 4, height // 2 + 1)))
        if x1 <= x0 or y1 <= y0:
            continue
        theta = rng.uniform(0.0, np.pi)
        lam = rng.uniform(4.0, 16.0)
        amp = rng.uniform(25.0, 80.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ys, xs = np.mgrid[y0:y1, x0:x1]
        wave = np.sin((xs * np.cos(theta) + ys * np.sin(theta)) * 2.0 * np.pi / lam + phase)
        img[y0:y1, x0:x1] = 0.35 * img[y0:y1, x0:x1] + 0.65 * (128.0 + amp * wave)
    img = img + rng.normal(0.0, 2.0, size=img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)
