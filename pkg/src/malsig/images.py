"""Byte signals and byteplot images.

A binary is read as a 1-D sequence of byte values in [0, 255] (a "byte
signal").  Reshaping that signal row-major at a fixed width gives a
grayscale image whose height grows with file size; the width comes from a
size-banded policy table.  The final partial row, if any, is padded with
zeros, so images of the same binary are always bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyInput, InvalidConfig


@dataclass(frozen=True)
class WidthPolicy:
    """Size-banded image width table.

    ``bands`` is an ordered sequence of ``(max_file_size_bytes, width)``
    pairs; the first band whose threshold is >= the file size wins.  Files
    larger than every threshold get ``fallback`` width.
    """

    bands: tuple[tuple[int, int], ...]
    fallback: int

    def __post_init__(self):
        if not self.bands:
            raise InvalidConfig("width policy needs at least one band")
        thresholds = [t for t, _ in self.bands]
        if any(later <= earlier for earlier, later in zip(thresholds, thresholds[1:])):
            raise InvalidConfig("width policy thresholds must be strictly increasing")
        if any(w < 1 for _, w in self.bands) or self.fallback < 1:
            raise InvalidConfig("width policy widths must be positive")

    def width_for(self, size: int) -> int:
        for threshold, width in self.bands:
            if size <= threshold:
                return width
        return self.fallback


# Classic byteplot width table: narrow images for small files, capped at
# 1024 columns for anything above 1 MB.
DEFAULT_WIDTH_POLICY = WidthPolicy(
    bands=(
        (10 * 1024, 32),
        (30 * 1024, 64),
        (60 * 1024, 128),
        (100 * 1024, 256),
        (200 * 1024, 384),
        (500 * 1024, 512),
        (1000 * 1024, 768),
    ),
    fallback=1024,
)


class PaddedSignal(NamedTuple):
    values: np.ndarray
    truncated: bool


def to_signal(raw: bytes | bytearray | memoryview) -> np.ndarray:
    """Interpret raw bytes as a 1-D uint8 signal, one sample per byte."""
    if len(raw) == 0:
        raise EmptyInput("cannot build a signal from zero bytes")
    return np.frombuffer(bytes(raw), dtype=np.uint8).copy()


def to_image(signal: np.ndarray, policy: WidthPolicy = DEFAULT_WIDTH_POLICY) -> np.ndarray:
    """Reshape a byte signal into a 2-D grayscale image.

    Width is chosen by ``policy`` from the signal length, height is
    ``ceil(length / width)``, and the final partial row is zero-padded.
    Returns a ``(height, width)`` uint8 array.
    """
    signal = np.asarray(signal, dtype=np.uint8).ravel()
    n = signal.size
    if n == 0:
        raise EmptyInput("cannot build an image from an empty signal")
    width = policy.width_for(n)
    height = math.ceil(n / width)
    padded = np.zeros(width * height, dtype=np.uint8)
    padded[:n] = signal
    return padded.reshape(height, width)


def pad_to_length(signal: np.ndarray, m: int) -> PaddedSignal:
    """Zero-pad a signal up to length ``m``, or truncate (flagged) if longer."""
    if m < 1:
        raise InvalidConfig("target length must be >= 1")
    signal = np.asarray(signal).ravel()
    if signal.size > m:
        return PaddedSignal(signal[:m].copy(), True)
    out = np.zeros(m, dtype=signal.dtype)
    out[: signal.size] = signal
    return PaddedSignal(out, False)


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize a grayscale image with corner-aligned bilinear interpolation.

    Sampling maps output corners onto input corners exactly; values are
    quantized round-half-up and clamped to [0, 255] so repeated runs are
    bit-identical.  Returns a ``(out_h, out_w)`` uint8 array.
    """
    if out_w < 1 or out_h < 1:
        raise InvalidConfig("output dimensions must be >= 1")
    src = np.asarray(img, dtype=np.float64)
    if src.ndim != 2 or src.size == 0:
        raise EmptyInput("input image must be a non-empty 2-D array")
    h, w = src.shape

    rows = np.linspace(0.0, h - 1.0, out_h)
    cols = np.linspace(0.0, w - 1.0, out_w)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]

    v00 = src[np.ix_(r0, c0)]
    v01 = src[np.ix_(r0, c1)]
    v10 = src[np.ix_(r1, c0)]
    v11 = src[np.ix_(r1, c1)]
    out = (1 - fr) * ((1 - fc) * v00 + fc * v01) + fr * ((1 - fc) * v10 + fc * v11)

    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def save_png(img: np.ndarray, path) -> None:
    """Export an image as 8-bit grayscale PNG (no alpha)."""
    from PIL import Image

    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim != 2:
        raise EmptyInput("PNG export expects a 2-D grayscale array")
    Image.fromarray(arr, mode="L").save(path, format="PNG")
