"""Relating the confidence score to downstream segmentation quality.

Latents are damaged at graded levels, decoded, scored, and segmented; the
report correlates confidence with DICE across all (sample, level) pairs.
Samples where segmentation fails outright (DICE < 0.5) are additionally
flagged as the degraded regime where confidence is not a reliable proxy.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

from . import tensor_io
from ._rng import substream_seq
from .corruption import CorruptionConfig, corrupt_latents, foreground_mask
from .errors import DegenerateInput, EmptyInput, InvalidArgument, ShapeError
from .model import CodecModel, decode, decode_batch, encode
from .perturb import score_sample
from .scores import confidence_score
from .synthdata import grade_damage

DEGRADED_DICE_CUTOFF = 0.5
DEFAULT_DAMAGE_LEVELS = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Overlap score 2|A&B| / (|A| + |B|); two empty masks count as 1.0."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"mask dims differ: {a.shape} vs {b.shape}")
    if not np.isin(a, (0, 1)).all() or not np.isin(b, (0, 1)).all():
        raise InvalidArgument("masks must be strictly binary")
    na = int(np.count_nonzero(a))
    nb = int(np.count_nonzero(b))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(np.logical_and(a, b)))
    return 2.0 * inter / (na + nb)


def pearson(xs, ys) -> float:
    """Product-moment correlation of two equally long series."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ShapeError("series must be 1-D and equally long")
    if xs.size < 3:
        raise InvalidArgument(f"need n >= 3 points, got {xs.size}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = math.sqrt(float(np.sum(dx * dx)))
    sy = math.sqrt(float(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("a series has zero variance")
    r = float(np.sum(dx * dy)) / (sx * sy)
    return max(-1.0, min(1.0, r))


def threshold_filter(samples: list[tuple], cutoff: float) -> tuple[list, list]:
    """Split (id, delta) samples into (kept, rejected) ids at delta >= cutoff."""
    kept = [sid for sid, d in samples if d >= cutoff]
    rejected = [sid for sid, d in samples if d < cutoff]
    return kept, rejected


def make_threshold_segmenter(threshold: float = 0.92) -> Callable[[np.ndarray], np.ndarray]:
    """Default segmenter: intensity threshold, keep the largest 4-connected blob.

    The default cutoff sits between the decoded body and organ intensities of
    the bundled toy codec on the default phantoms.
    """

    def segment(img: np.ndarray) -> np.ndarray:
        binary = np.asarray(img) >= threshold
        labels, n = ndimage.label(binary)
        if n == 0:
            return np.zeros(np.asarray(img).shape, dtype=np.uint8)
        sizes = ndimage.sum_labels(binary, labels, index=np.arange(1, n + 1))
        keep = 1 + int(np.argmax(sizes))
        return (labels == keep).astype(np.uint8)

    return segment


@dataclass(frozen=True)
class CorrelationConfig:
    corruption: CorruptionConfig = CorruptionConfig()
    damage_levels: tuple[float, ...] = DEFAULT_DAMAGE_LEVELS
    damage_seed: int = 2


@dataclass(frozen=True)
class CorrelationPair:
    sample_id: int
    damage_level: float
    delta: float
    dice: float


@dataclass(frozen=True)
class CorrelationReport:
    pairs: tuple[CorrelationPair, ...]
    pearson_r: float | None
    abs_r: float | None
    n: int
    status: str  # "ok" or "degenerate"
    n_degraded: int  # pairs with DICE below the cutoff
    degraded_r: float | None  # correlation inside the degraded regime, when defined
    degraded_flag: bool  # degraded-regime samples present; confidence unreliable there


def _correlate_one(model, x, ref_mask, segmenter, cfg: CorrelationConfig, idx: int):
    h = encode(model, x)
    damaged = grade_damage(h, list(cfg.damage_levels), substream_seq(cfg.damage_seed, idx))
    pairs = []
    for j, (level, h_dmg) in enumerate(zip(cfg.damage_levels, damaged)):
        corr = replace(cfg.corruption, seed=substream_seq(cfg.corruption.seed, idx, j))
        xhat = decode(model, h_dmg)
        mask = foreground_mask(xhat, corr.foreground_threshold, h.shape[1], h.shape[2])
        variants = decode_batch(model, corrupt_latents(h_dmg, mask, corr))
        delta = confidence_score(xhat, variants).delta
        predicted = ref_mask if segmenter == "oracle" else segmenter(xhat)
        pairs.append(
            CorrelationPair(
                sample_id=idx, damage_level=float(level), delta=delta, dice=dice(predicted, ref_mask)
            )
        )
    return pairs


def run_correlation_study(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    model: CodecModel,
    segmenter,
    cfg: CorrelationConfig,
    jobs: int = 1,
) -> CorrelationReport:
    """Score delta and DICE for every (sample, damage level) pair.

    ``segmenter`` maps a decoded image to a binary mask; the string "oracle"
    substitutes the reference mask (interface testing). A zero-variance series
    is reported with status "degenerate" rather than raised.
    """
    if not dataset:
        raise EmptyInput("dataset is empty")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(
                pool.map(
                    lambda t: _correlate_one(model, t[1][0], t[1][1], segmenter, cfg, t[0]),
                    enumerate(dataset),
                )
            )
    else:
        chunks = [
            _correlate_one(model, img, mask, segmenter, cfg, i)
            for i, (img, mask) in enumerate(dataset)
        ]
    pairs = tuple(p for chunk in chunks for p in chunk)

    deltas = [p.delta for p in pairs]
    dices = [p.dice for p in pairs]
    try:
        r = pearson(deltas, dices)
        status = "ok"
    except DegenerateInput:
        r = None
        status = "degenerate"

    degraded = [p for p in pairs if p.dice < DEGRADED_DICE_CUTOFF]
    degraded_r = None
    if len(degraded) >= 3:
        try:
            degraded_r = pearson([p.delta for p in degraded], [p.dice for p in degraded])
        except DegenerateInput:
            degraded_r = None

    return CorrelationReport(
        pairs=pairs,
        pearson_r=r,
        abs_r=None if r is None else abs(r),
        n=len(pairs),
        status=status,
        n_degraded=len(degraded),
        degraded_r=degraded_r,
        degraded_flag=len(degraded) >= 3,
    )


def write_correlation_outputs(report: CorrelationReport, out_dir) -> list[Path]:
    """Emit correlation.csv: pair rows followed by summary footer rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "correlation.csv"
    rows = [
        ("pair", p.sample_id, p.damage_level, p.delta, p.dice) for p in report.pairs
    ]
    rows += [
        ("summary", "pearson_r", "" if report.pearson_r is None else report.pearson_r, "", ""),
        ("summary", "abs_r", "" if report.abs_r is None else report.abs_r, "", ""),
        ("summary", "n", report.n, "", ""),
        ("summary", "status", report.status, "", ""),
        ("summary", "n_degraded", report.n_degraded, "", ""),
        ("summary", "degraded_r", "" if report.degraded_r is None else report.degraded_r, "", ""),
        ("summary", "degraded_flag", int(report.degraded_flag), "", ""),
    ]
    tensor_io.write_csv(path, ["row_type", "sample_id", "damage_level", "delta", "dice"], rows)
    return [path]
