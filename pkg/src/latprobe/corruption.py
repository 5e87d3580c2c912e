"""Calibrated latent-code corruption.

A latent code (channels, height, width) is corrupted by adding zero-mean
Gaussian noise whose per-channel variance is alpha times the channel's own
population variance, restricted to foreground positions given by a binary
mask. Copies are drawn from per-copy substreams so they are reproducible and
order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .errors import InvalidArgument, ShapeError


@dataclass(frozen=True)
class CorruptionConfig:
    """Noise settings: ``alpha`` scales the per-channel variance, ``k`` copies."""

    alpha: float = 3.0
    k: int = 10
    seed: int | np.random.SeedSequence = 0
    foreground_threshold: float = 0.0
    mask_mode: str = "indicator"  # or "value_scaled": noise scaled by the latent values

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument(f"k must be >= 1, got {self.k}")
        if self.alpha < 0:
            raise InvalidArgument(f"alpha must be >= 0, got {self.alpha}")
        if self.mask_mode not in ("indicator", "value_scaled"):
            raise InvalidArgument(f"unknown mask_mode {self.mask_mode!r}")


def channel_std(h: np.ndarray) -> np.ndarray:
    """Population standard deviation of each channel of a (l, n, m) latent."""
    h = np.asarray(h)
    if h.ndim != 3 or h.size == 0:
        raise ShapeError(f"latent must be a non-empty (channels, h, w) array, got {h.shape}")
    flat = h.reshape(h.shape[0], -1).astype(np.float64)
    mean = flat.mean(axis=1, keepdims=True)
    return np.sqrt(np.mean((flat - mean) ** 2, axis=1))


def foreground_mask(
    xhat_clean: np.ndarray, threshold: float, target_h: int, target_w: int
) -> np.ndarray:
    """Binary foreground mask of the clean decode, resized to latent dims.

    A pixel is foreground when strictly above ``threshold``. Resizing is
    nearest-neighbor with source index floor((i + 0.5) * src / dst), an
    identity map when the dimensions already agree.
    """
    x = np.asarray(xhat_clean)
    if x.ndim != 2:
        raise ShapeError(f"image must be 2-D, got shape {x.shape}")
    if target_h < 1 or target_w < 1:
        raise InvalidArgument(f"target dims must be positive, got ({target_h}, {target_w})")
    px = (x > threshold).astype(np.uint8)
    if (target_h, target_w) == x.shape:
        return px
    src_h, src_w = x.shape
    rows = np.floor((np.arange(target_h) + 0.5) * (src_h / target_h)).astype(np.intp)
    cols = np.floor((np.arange(target_w) + 0.5) * (src_w / target_w)).astype(np.intp)
    rows = np.clip(rows, 0, src_h - 1)
    cols = np.clip(cols, 0, src_w - 1)
    return px[np.ix_(rows, cols)]


def corrupt_latents(h: np.ndarray, mask: np.ndarray, cfg: CorruptionConfig) -> list[np.ndarray]:
    """k corrupted copies of ``h``: copy i is h + mask * eta_i.

    eta_i is zero-mean Gaussian with std sqrt(alpha) * sigma_c per channel,
    drawn channel-major from the substream keyed by (cfg.seed, i). Background
    positions (mask == 0) are returned bit-unchanged in every copy.
    """
    h = np.asarray(h)
    if h.ndim != 3:
        raise ShapeError(f"latent must be (channels, h, w), got shape {h.shape}")
    mask = np.asarray(mask)
    if mask.shape != h.shape[1:]:
        raise ShapeError(f"mask {mask.shape} does not match latent spatial dims {h.shape[1:]}")
    if cfg.k < 1:
        raise InvalidArgument("k must be >= 1")

    fg = mask.astype(bool)
    if cfg.alpha == 0.0 or not fg.any():
        return [h.copy() for _ in range(cfg.k)]

    scale = np.sqrt(cfg.alpha) * channel_std(h)  # per-channel noise std
    copies = []
    for i in range(cfg.k):
        eta = stream(cfg.seed, i).standard_normal(h.shape)
        eta *= scale[:, None, None]
        if cfg.mask_mode == "value_scaled":
            eta *= h.astype(np.float64)
        out = h.copy()
        out[:, fg] += eta[:, fg]  # in-place add casts to the latent dtype
        copies.append(out)
    return copies
