"""Sky-image features (normalized red-blue ratio statistics, Renyi entropy)
and the clear-sky index."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FeatureError(Exception):
    pass


class BadMagic(FeatureError):
    pass


class TruncatedPixelData(FeatureError):
    pass


class UnsupportedMaxval(FeatureError):
    pass


class EmptyImage(FeatureError):
    pass


class EmptyInput(FeatureError):
    pass


@dataclass(frozen=True)
class ImageRGB:
    width: int
    height: int
    pixels: np.ndarray  # (n, 3) uint8-range ints, row-major


@dataclass(frozen=True)
class NrbrSummary:
    mu: float
    sigma: float
    entropy: float | None = None


def load_image_ppm(path) -> ImageRGB:
    """Read a binary PPM (P6, maxval 255) image."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise BadMagic("not a binary PPM (P6) file")
    # Header: magic, width, height, maxval, each possibly separated by
    # whitespace or comment lines.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedPixelData("truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} unsupported (expected 255)")
    n = width * height
    raw = data[pos:pos + 3 * n]
    if len(raw) < 3 * n:
        raise TruncatedPixelData(
            f"expected {3 * n} bytes of pixel data, got {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, 3).astype(np.int64)
    return ImageRGB(width=width, height=height, pixels=pixels)


def nrbr_values(img: ImageRGB) -> np.ndarray:
    """Per-pixel (R - B) / (R + B); pixels with R + B = 0 map to 0."""
    if img.pixels.size == 0:
        raise EmptyImage("image has no pixels")
    r = img.pixels[:, 0].astype(float)
    b = img.pixels[:, 2].astype(float)
    denom = r + b
    out = np.zeros_like(r)
    nz = denom > 0
    out[nz] = (r[nz] - b[nz]) / denom[nz]
    return out


def renyi_entropy(values, bins: int = 150, gamma: int = 2) -> float:
    """Order-gamma Renyi entropy (nats) of a histogram over [-1, 1].

    H = ln(sum p_i^gamma) / (1 - gamma), with p_i the relative bin
    frequencies over ``bins`` evenly spaced bins.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("no values for entropy")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    counts, _ = np.histogram(np.clip(values, -1.0, 1.0), bins=bins, range=(-1.0, 1.0))
    p = counts / counts.sum()
    s = float(np.sum(p ** gamma))
    return math.log(s) / (1 - gamma)


def nrbr_stats(img: ImageRGB, bins: int = 150, gamma: int = 2) -> NrbrSummary:
    """Mean, population std, and Renyi entropy of the image's nRBR field."""
    vals = nrbr_values(img)
    return NrbrSummary(
        mu=float(vals.mean()),
        sigma=float(vals.std()),  # population std
        entropy=renyi_entropy(vals, bins=bins, gamma=gamma),
    )


def clear_sky_index(ghi: float, ghi_clr: float) -> float:
    """GHI / clear-sky GHI; 0 by convention when the clear-sky value is 0."""
    if ghi_clr <= 0:
        return 0.0
    return ghi / ghi_clr
