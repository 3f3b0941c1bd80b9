"""GIST-style global texture descriptors.

The descriptor is built in three stages:

1. A bank of oriented band-pass filters is constructed directly in the
   frequency domain as polar-separable log-Gabor transfer functions: a
   log-Gaussian radial profile whose center frequency halves from one
   scale to the next, times a Gaussian angular profile around each
   orientation.  The DC bin of every filter is forced to zero, so constant
   images produce zero response, and each transfer function is normalized
   to peak gain 1.

2. The (square, grayscale) image is filtered by pointwise multiplication
   of its FFT with each transfer function; the magnitude of the inverse
   transform is the sub-band response.  Filters occupy a single frequency
   lobe, so the magnitude is the local envelope of the oriented response.

3. Each magnitude map is average-pooled over a grid x grid partition of
   non-overlapping blocks.  Concatenating the pooled values sub-band-major
   (then row-major within each grid) gives the descriptor.

With the default bank (8 + 8 + 4 orientations over three scales) and a
4 x 4 grid the descriptor has 4 * 4 * 20 = 320 entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidConfig, SizeMismatch
from .images import resize_bilinear

DEFAULT_IMAGE_SIZE = 64
DEFAULT_ORIENTATIONS = (8, 8, 4)
DEFAULT_GRID = 4

# Filter geometry: highest radial center frequency in cycles/pixel (period
# of 4 pixels), log-domain radial bandwidth ratio, and the divisor turning
# the orientation spacing into the angular Gaussian sigma.
DEFAULT_MAX_CENTER_FREQ = 0.25
DEFAULT_BANDWIDTH_RATIO = 0.65
DEFAULT_ANGULAR_RATIO = 1.5


@dataclass(frozen=True)
class FilterBank:
    """Immutable stack of frequency-domain transfer functions.

    ``transfer`` has shape ``(n_filters, size, size)``; entry ``k`` is the
    non-negative real transfer function of sub-band ``k`` on the unshifted
    FFT grid.  ``center_freqs`` and ``angles`` record the (scale,
    orientation) each filter was tuned to.
    """

    transfer: np.ndarray
    image_size: int
    orientations_per_scale: tuple[int, ...]
    center_freqs: tuple[float, ...]
    angles: tuple[float, ...]

    @property
    def n_filters(self) -> int:
        return self.transfer.shape[0]


def build_gabor_bank(
    image_size: int = DEFAULT_IMAGE_SIZE,
    orientations_per_scale: tuple[int, ...] = DEFAULT_ORIENTATIONS,
    max_center_freq: float = DEFAULT_MAX_CENTER_FREQ,
    bandwidth_ratio: float = DEFAULT_BANDWIDTH_RATIO,
    angular_ratio: float = DEFAULT_ANGULAR_RATIO,
) -> FilterBank:
    """Construct the log-Gabor filter bank for square images of ``image_size``.

    One filter per (scale, orientation); scale ``s`` is centered at
    ``max_center_freq / 2**s`` cycles/pixel and orientations are evenly
    spaced over [0, pi).
    """
    if image_size < 16 or image_size & (image_size - 1) != 0:
        raise InvalidConfig(f"image size must be a power of two >= 16, got {image_size}")
    if not orientations_per_scale or any(n < 1 for n in orientations_per_scale):
        raise InvalidConfig("every scale needs at least one orientation")
    if not 0 < max_center_freq <= 0.5:
        raise InvalidConfig("max center frequency must lie in (0, 0.5] cycles/pixel")
    if not 0 < bandwidth_ratio < 1:
        raise InvalidConfig("bandwidth ratio must lie in (0, 1)")

    n = image_size
    fx = np.fft.fftfreq(n)[None, :]
    fy = np.fft.fftfreq(n)[:, None]
    radius = np.hypot(fx, fy)
    radius[0, 0] = 1.0  # dummy, the DC bin is zeroed below
    theta = np.arctan2(np.broadcast_to(fy, (n, n)), np.broadcast_to(fx, (n, n)))

    log_sigma = np.log(bandwidth_ratio)
    filters = []
    freqs = []
    angles = []
    for scale, n_orient in enumerate(orientations_per_scale):
        f0 = max_center_freq / 2.0**scale
        radial = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * log_sigma**2))
        radial[0, 0] = 0.0
        sigma_theta = (np.pi / n_orient) / angular_ratio
        for o in range(n_orient):
            angle = o * np.pi / n_orient
            # shortest angular distance, wrapped into (-pi, pi]
            delta = np.arctan2(np.sin(theta - angle), np.cos(theta - angle))
            transfer = radial * np.exp(-(delta**2) / (2.0 * sigma_theta**2))
            peak = transfer.max()
            if peak <= 0:
                raise InvalidConfig(
                    f"filter (scale {scale}, orientation {o}) has no pass band at size {n}"
                )
            filters.append(transfer / peak)
            freqs.append(f0)
            angles.append(angle)

    stack = np.stack(filters)
    stack.setflags(write=False)
    return FilterBank(
        transfer=stack,
        image_size=image_size,
        orientations_per_scale=tuple(orientations_per_scale),
        center_freqs=tuple(freqs),
        angles=tuple(angles),
    )


@lru_cache(maxsize=8)
def default_bank(
    image_size: int = DEFAULT_IMAGE_SIZE,
    orientations_per_scale: tuple[int, ...] = DEFAULT_ORIENTATIONS,
) -> FilterBank:
    return build_gabor_bank(image_size, orientations_per_scale)


def subband_responses(img: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Filter an image with every transfer function and take magnitudes.

    ``img`` must be square and match ``bank.image_size``.  Returns a
    ``(n_filters, size, size)`` float array of response magnitudes.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SizeMismatch(f"expected a square image, got shape {arr.shape}")
    if arr.shape[0] != bank.image_size:
        raise SizeMismatch(
            f"image size {arr.shape[0]} does not match bank size {bank.image_size}"
        )
    spectrum = np.fft.fft2(arr)
    responses = np.fft.ifft2(spectrum[None, :, :] * bank.transfer, axes=(-2, -1))
    return np.abs(responses)


def pool_blocks(maps: np.ndarray, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Average each magnitude map over a grid x grid block partition.

    Returns the descriptor: pooled means concatenated sub-band-major, each
    sub-band's grid laid out row-major.  Length is ``grid**2 * n_maps``.
    """
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim == 2:
        maps = maps[None]
    n_maps, h, w = maps.shape
    if h != w:
        raise SizeMismatch(f"maps must be square, got {h}x{w}")
    if h % grid != 0:
        raise SizeMismatch(f"map size {h} is not divisible by grid {grid}")
    block = h // grid
    pooled = maps.reshape(n_maps, grid, block, grid, block).mean(axis=(2, 4))
    return pooled.reshape(n_maps * grid * grid)


def gist_descriptor(
    img: np.ndarray,
    bank: FilterBank | None = None,
    grid: int = DEFAULT_GRID,
) -> np.ndarray:
    """Full descriptor pipeline: resize to the bank's size, filter, pool.

    ``img`` is any 2-D grayscale byteplot; the result is deterministic, so
    identical binaries always map to identical descriptors.
    """
    if bank is None:
        bank = default_bank()
    arr = np.asarray(img)
    if arr.shape != (bank.image_size, bank.image_size):
        arr = resize_bilinear(arr, bank.image_size, bank.image_size)
    return pool_blocks(subband_responses(arr, bank), grid=grid)


def orientations_for_subbands(n_subbands: int, max_scales: int = 4) -> tuple[int, ...]:
    """Split a sub-band budget across scales, finest scales first.

    Used to hit a target descriptor length: ``grid**2 * n_subbands``.  The
    budget is spread as evenly as possible over up to ``max_scales``
    scales, with remainders going to the finer scales.
    """
    if n_subbands < 1:
        raise InvalidConfig("need at least one sub-band")
    scales = min(max_scales, n_subbands)
    base, rem = divmod(n_subbands, scales)
    return tuple([base + 1] * rem + [base] * (scales - rem))
