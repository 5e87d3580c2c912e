"""Deterministic phantom images with reference masks.

Each phantom is a dark frame holding a large smooth elliptical body with a
smaller, brighter elliptical organ inside it; the reference mask marks the
organ pixels. Background pixels are exactly 0.0. Geometry, intensities and
texture are all drawn from per-sample substreams, so a spec generates the
same bytes every time. These are synthetic stand-ins: no clinical realism is
intended or claimed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor_io
from ._rng import stream, substream_seq
from .corruption import channel_std
from .errors import FormatError, InvalidArgument


@dataclass(frozen=True)
class PhantomSpec:
    count: int = 64
    image_side: int = 64
    seed: int = 0
    body_axes: tuple[float, float] = (0.40, 0.47)  # semi-axis range, fraction of side
    organ_axes: tuple[float, float] = (0.10, 0.16)
    body_level: float = 0.55
    organ_level: float = 0.90
    texture_amp: float = 0.05

    def __post_init__(self):
        if self.count < 1:
            raise InvalidArgument("count must be >= 1")
        if self.image_side < 8:
            raise InvalidArgument("image_side must be >= 8")
        if self.body_axes[1] >= 0.5:
            raise InvalidArgument("body semi-axes must fit inside the image")
        if self.organ_axes[1] >= self.body_axes[0]:
            raise InvalidArgument("organ must fit inside the body")
        if not (self.organ_level > self.body_level > 0.0):
            raise InvalidArgument("need organ level > body level > background 0")


def _ellipse(side: int, cy: float, cx: float, ay: float, ax: float) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side]
    return ((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2 <= 1.0


def make_phantom(spec: PhantomSpec, index: int) -> tuple[np.ndarray, np.ndarray]:
    """One (image, organ mask) pair, fully determined by (spec.seed, index)."""
    rng = stream(spec.seed, index)
    side = spec.image_side
    center = (side - 1) / 2.0

    body_ay = side * rng.uniform(*spec.body_axes)
    body_ax = side * rng.uniform(*spec.body_axes)
    jitter = 0.02 * side
    body_cy = center + rng.uniform(-jitter, jitter)
    body_cx = center + rng.uniform(-jitter, jitter)

    organ_ay = side * rng.uniform(*spec.organ_axes)
    organ_ax = side * rng.uniform(*spec.organ_axes)
    # axis-aligned bound keeps the organ ellipse strictly inside the body
    max_dy = max(0.0, body_ay - organ_ay - 2.0)
    max_dx = max(0.0, body_ax - organ_ax - 2.0)
    organ_cy = body_cy + rng.uniform(-0.6, 0.6) * max_dy
    organ_cx = body_cx + rng.uniform(-0.6, 0.6) * max_dx

    body = _ellipse(side, body_cy, body_cx, body_ay, body_ax)
    organ = _ellipse(side, organ_cy, organ_cx, organ_ay, organ_ax)

    img = np.zeros((side, side), dtype=np.float64)
    img[body] = spec.body_level
    img[organ] = spec.organ_level
    if spec.texture_amp > 0.0:
        noise = rng.standard_normal((side, side))
        noise = _box_blur3(_box_blur3(noise))
        img[body] += spec.texture_amp * noise[body]
    img = np.clip(img, 0.0, 1.0)
    img[~body] = 0.0  # background stays exactly zero
    return img.astype(np.float32), organ.astype(np.uint8)


def _box_blur3(a: np.ndarray) -> np.ndarray:
    """3x3 box filter with zero padding at the borders."""
    p = np.zeros((a.shape[0] + 2, a.shape[1] + 2), dtype=np.float64)
    p[1:-1, 1:-1] = a
    out = np.zeros_like(a, dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            out += p[di : di + a.shape[0], dj : dj + a.shape[1]]
    return out / 9.0


def generate_phantoms(spec: PhantomSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """The full (image, mask) list for a spec; sample i ignores all others."""
    return [make_phantom(spec, i) for i in range(spec.count)]


def grade_damage(
    h: np.ndarray, levels: list[float], seed: int | np.random.SeedSequence
) -> list[np.ndarray]:
    """Latents with additive noise of increasing magnitude.

    Level ``v`` adds zero-mean Gaussian noise with std v * sigma_c per
    channel, everywhere. Each level uses its own substream (seed, level
    index), so a prefix of ``levels`` yields the same latents.
    """
    if any(v < 0 for v in levels):
        raise InvalidArgument("damage levels must be non-negative")
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise InvalidArgument("damage levels must be ascending")
    h = np.asarray(h)
    sigma = channel_std(h)
    out = []
    for j, level in enumerate(levels):
        if level == 0.0:
            out.append(h.copy())
            continue
        noise = stream(seed, j).standard_normal(h.shape)
        noise *= (level * sigma)[:, None, None]
        damaged = h.astype(np.float64) + noise
        out.append(damaged.astype(h.dtype))
    return out


# --- dataset directory ------------------------------------------------------


def dump_phantom_dir(out_dir, samples: list[tuple[np.ndarray, np.ndarray]]) -> list[Path]:
    """Write img_XXXX.npy / mask_XXXX.npy plus index.csv; returns paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    rows = []
    for i, (img, mask) in enumerate(samples):
        img_name = f"img_{i:04d}.npy"
        mask_name = f"mask_{i:04d}.npy"
        tensor_io.write_array(out_dir / img_name, img.astype(np.float32))
        tensor_io.write_array(out_dir / mask_name, mask.astype(np.uint8))
        written += [out_dir / img_name, out_dir / mask_name]
        rows.append((i, img_name, mask_name))
    index = out_dir / "index.csv"
    tensor_io.write_csv(index, ["sample_id", "image", "mask"], rows)
    written.append(index)
    return written


def load_phantom_dir(path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read back a directory written by :func:`dump_phantom_dir`."""
    path = Path(path)
    index = path / "index.csv"
    if not index.is_file():
        raise FormatError(f"{path}: missing index.csv")
    header, rows = tensor_io.read_csv(index)
    if header != ["sample_id", "image", "mask"]:
        raise FormatError(f"{index}: unexpected columns {header}")
    samples = []
    for row in rows:
        img = tensor_io.read_array(path / row[1])
        mask = tensor_io.read_array(path / row[2])
        samples.append((img, mask))
    return samples
