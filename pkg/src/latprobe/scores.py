"""Output-ensemble scores: per-pixel variance and histogram mutual information.

Given k decoded variants of one input, the variance score is the mean of the
per-pixel population variance map (an uncertainty measure), and the
confidence score is the mean mutual information between the clean output and
each variant, estimated from a joint 2-D histogram whose bin count follows
floor(sqrt(n_pixels / 5)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import joint_hist
from .errors import EmptyInput, InvalidArgument, ShapeError


@dataclass(frozen=True)
class VarianceResult:
    map: np.ndarray  # per-pixel population variance, same dims as the images
    gamma: float  # mean of map over all pixels


@dataclass(frozen=True)
class ConfidenceResult:
    per_copy_mi: tuple[float, ...]  # nats
    delta: float  # arithmetic mean of per_copy_mi


def num_bins(n_pixels: int) -> int:
    """Histogram bin count floor(sqrt(n / 5)), clamped below at 1.

    isqrt(n // 5) equals floor(sqrt(n / 5)) exactly for integer n.
    """
    if n_pixels < 1:
        raise InvalidArgument(f"pixel count must be positive, got {n_pixels}")
    return max(1, math.isqrt(n_pixels // 5))


def variance_score(images: list[np.ndarray]) -> VarianceResult:
    """Per-pixel population variance across k >= 2 equally sized images."""
    if len(images) < 2:
        raise InvalidArgument(f"variance needs k >= 2 images, got {len(images)}")
    shape = np.asarray(images[0]).shape
    for im in images[1:]:
        if np.asarray(im).shape != shape:
            raise ShapeError(f"image dims differ: {np.asarray(im).shape} vs {shape}")
    stack = np.stack([np.asarray(im, dtype=np.float64) for im in images])
    mean = stack.mean(axis=0)
    var_map = np.mean((stack - mean) ** 2, axis=0)
    return VarianceResult(map=var_map, gamma=float(var_map.mean()))


def joint_histogram(a: np.ndarray, b: np.ndarray, bins: int) -> np.ndarray:
    """Joint counts over equal-width bins spanning the shared range of a and b.

    The top edge is inclusive; a degenerate range (max == min) puts all mass
    in bin (0, 0). Total count equals the pixel count.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image dims differ: {a.shape} vs {b.shape}")
    if bins < 1:
        raise InvalidArgument(f"bins must be >= 1, got {bins}")
    lo = min(float(a.min()), float(b.min()))
    hi = max(float(a.max()), float(b.max()))
    return joint_hist(a.ravel(), b.ravel(), int(bins), lo, hi)


def mi_from_counts(counts: np.ndarray) -> float:
    """Mutual information (nats) of a joint count matrix.

    Sums nonzero-cell terms with math.fsum, so the result is exactly the same
    for a matrix and its transpose. Clamped at >= 0 against round-off.
    """
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n <= 0:
        raise EmptyInput("histogram has no mass")
    p = counts / n
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    rows, cols = np.nonzero(p)
    terms = [
        p[i, j] * (math.log(p[i, j]) - math.log(pa[i]) - math.log(pb[j]))
        for i, j in zip(rows.tolist(), cols.tolist())
    ]
    return max(0.0, math.fsum(terms))


def mutual_information(a: np.ndarray, b: np.ndarray, bins: int | None = None) -> float:
    """Histogram MI between two equally sized images, in nats.

    ``bins`` defaults to num_bins(pixel count). Terms with zero joint mass
    contribute nothing; the result is symmetric in (a, b) and non-negative.
    """
    a = np.asarray(a)
    if bins is None:
        bins = num_bins(a.size)
    return mi_from_counts(joint_histogram(a, b, bins))


def marginal_entropy(a: np.ndarray, bins: int | None = None) -> float:
    """Entropy (nats) of an image's own histogram; equals MI(a, a)."""
    return mutual_information(a, a, bins=bins)


def confidence_score(
    xhat_clean: np.ndarray, variants: list[np.ndarray], bins: int | None = None
) -> ConfidenceResult:
    """Mean MI between the clean output and each of the k variants."""
    if not variants:
        raise EmptyInput("confidence needs at least one variant")
    per_copy = tuple(mutual_information(xhat_clean, v, bins=bins) for v in variants)
    return ConfidenceResult(per_copy_mi=per_copy, delta=math.fsum(per_copy) / len(per_copy))
