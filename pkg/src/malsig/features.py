"""Feature extraction configs: bytes in, fixed-length descriptor out.

Two descriptor kinds are supported.  "gist" runs the byteplot image
through the texture-descriptor pipeline; "rp" zero-pads the byte signal
to a fixed length and applies a seeded Gaussian random projection.  A
config is a plain dataclass that serializes to/from the fingerprint-store
metadata, so any stored corpus can regenerate its descriptors exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gist as gist_mod
from . import images, projections
from .errors import InvalidConfig


@dataclass(frozen=True)
class GistConfig:
    kind = "gist"
    image_size: int = gist_mod.DEFAULT_IMAGE_SIZE
    orientations_per_scale: tuple[int, ...] = gist_mod.DEFAULT_ORIENTATIONS
    grid: int = gist_mod.DEFAULT_GRID
    max_center_freq: float = gist_mod.DEFAULT_MAX_CENTER_FREQ
    bandwidth_ratio: float = gist_mod.DEFAULT_BANDWIDTH_RATIO
    angular_ratio: float = gist_mod.DEFAULT_ANGULAR_RATIO
    truncate_to: int | None = None  # prefix-truncate when the grid can't hit a dim

    @property
    def dim(self) -> int:
        native = self.grid**2 * sum(self.orientations_per_scale)
        return self.truncate_to if self.truncate_to is not None else native


@dataclass(frozen=True)
class RpConfig:
    kind = "rp"
    dim_out: int = 512
    signal_length: int = 2**20
    seed: int = 7

    @property
    def dim(self) -> int:
        return self.dim_out


FeatureConfig = GistConfig | RpConfig


@lru_cache(maxsize=16)
def _bank_for(config: GistConfig) -> gist_mod.FilterBank:
    return gist_mod.build_gabor_bank(
        image_size=config.image_size,
        orientations_per_scale=config.orientations_per_scale,
        max_center_freq=config.max_center_freq,
        bandwidth_ratio=config.bandwidth_ratio,
        angular_ratio=config.angular_ratio,
    )


@lru_cache(maxsize=16)
def _projection_for(config: RpConfig) -> projections.ProjectionMatrix:
    return projections.make_projection(config.dim_out, config.signal_length, config.seed)


def describe_bytes(
    raw: bytes,
    config: FeatureConfig,
    policy: images.WidthPolicy = images.DEFAULT_WIDTH_POLICY,
) -> np.ndarray:
    """Compute the descriptor of one binary under ``config``."""
    signal = images.to_signal(raw)
    if isinstance(config, GistConfig):
        img = images.to_image(signal, policy)
        desc = gist_mod.gist_descriptor(img, bank=_bank_for(config), grid=config.grid)
        if config.truncate_to is not None:
            desc = desc[: config.truncate_to]
        return desc
    if isinstance(config, RpConfig):
        padded, _ = images.pad_to_length(signal, config.signal_length)
        return projections.project(padded, _projection_for(config))
    raise InvalidConfig(f"unknown feature config {config!r}")


def describe_all(
    raws: list[bytes],
    config: FeatureConfig,
    policy: images.WidthPolicy = images.DEFAULT_WIDTH_POLICY,
) -> np.ndarray:
    """Descriptors for a batch of binaries, stacked as rows."""
    if isinstance(config, RpConfig):
        padded = np.stack(
            [images.pad_to_length(images.to_signal(r), config.signal_length).values for r in raws]
        )
        return projections.project_many(padded, _projection_for(config))
    return np.stack([describe_bytes(r, config, policy) for r in raws])


def feature_config(
    kind: str,
    dim: int,
    signal_length: int = 2**20,
    rp_seed: int = 7,
    grid: int = gist_mod.DEFAULT_GRID,
) -> FeatureConfig:
    """Build the config that realizes a target descriptor dimension.

    Random projections hit any dim natively.  The texture descriptor hits
    dims divisible by grid**2 by sizing the filter bank; other dims fall
    back to prefix truncation of the next-larger bank, recorded in the
    config so reports stay reproducible.
    """
    if dim < 1:
        raise InvalidConfig("dimension must be >= 1")
    if kind == "rp":
        if dim >= signal_length:
            raise InvalidConfig("projection dim must be below the signal length")
        return RpConfig(dim_out=dim, signal_length=signal_length, seed=rp_seed)
    if kind == "gist":
        cells = grid**2
        n_subbands, rem = divmod(dim, cells)
        if rem == 0:
            ops = gist_mod.orientations_for_subbands(n_subbands)
            return GistConfig(orientations_per_scale=ops, grid=grid)
        ops = gist_mod.orientations_for_subbands(n_subbands + 1)
        return GistConfig(orientations_per_scale=ops, grid=grid, truncate_to=dim)
    raise InvalidConfig(f"unknown feature kind {kind!r}")


def config_metadata(config: FeatureConfig) -> dict:
    """Serialize a config for embedding in store headers and reports."""
    if isinstance(config, GistConfig):
        meta = {
            "kind": "gist",
            "image_size": config.image_size,
            "orientations_per_scale": list(config.orientations_per_scale),
            "grid": config.grid,
            "max_center_freq": config.max_center_freq,
            "bandwidth_ratio": config.bandwidth_ratio,
            "angular_ratio": config.angular_ratio,
        }
        if config.truncate_to is not None:
            meta["truncate_to"] = config.truncate_to
        return meta
    if isinstance(config, RpConfig):
        return {
            "kind": "rp",
            "dim_out": config.dim_out,
            "signal_length": config.signal_length,
            "seed": config.seed,
            "prng": projections.PRNG_NAME,
            "numpy": np.__version__,
        }
    raise InvalidConfig(f"unknown feature config {config!r}")


def config_from_metadata(meta: dict) -> FeatureConfig:
    kind = meta.get("kind")
    if kind == "gist":
        return GistConfig(
            image_size=int(meta["image_size"]),
            orientations_per_scale=tuple(meta["orientations_per_scale"]),
            grid=int(meta["grid"]),
            max_center_freq=float(meta["max_center_freq"]),
            bandwidth_ratio=float(meta["bandwidth_ratio"]),
            angular_ratio=float(meta["angular_ratio"]),
            truncate_to=int(meta["truncate_to"]) if "truncate_to" in meta else None,
        )
    if kind == "rp":
        return RpConfig(
            dim_out=int(meta["dim_out"]),
            signal_length=int(meta["signal_length"]),
            seed=int(meta["seed"]),
        )
    raise InvalidConfig(f"metadata has unknown feature kind {kind!r}")
