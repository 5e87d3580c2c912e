"""Black-patch sanity study: paired scoring of original vs perturbed inputs.

Each sample is scored twice, once as-is and once with a random square patch
of the input blacked out, using the same corruption substream for both, so
every row is a paired comparison. The study emits per-sample rows, per
condition aggregates, and a histogram table of the confidence scores.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import tensor_io
from ._rng import stream, substream_seq
from .corruption import CorruptionConfig, corrupt_latents, foreground_mask
from .errors import EmptyInput, InvalidArgument
from .model import CodecModel, decode, decode_batch, encode
from .scores import ConfidenceResult, VarianceResult, confidence_score, variance_score

PATCH_RATIO = 50.0 / 256.0  # default patch side as a fraction of the image side


def default_patch_size(image_side: int) -> int:
    """Patch side scaled to the image so the blacked-out area ratio is fixed."""
    return max(1, int(round(PATCH_RATIO * image_side)))


@dataclass(frozen=True)
class StudyConfig:
    corruption: CorruptionConfig = CorruptionConfig()
    patch_size: int | None = None  # None: scale by PATCH_RATIO
    seed: int = 1  # patch placement stream, independent of the corruption seed


@dataclass(frozen=True)
class StudyRow:
    sample_id: int
    patch_row: int
    patch_col: int
    patch_fg_overlap: float  # fraction of patch pixels on input foreground
    gamma_orig: float
    delta_orig: float
    gamma_pert: float
    delta_pert: float
    var_in_patch: float  # mean of the perturbed variance map inside the patch
    var_out_patch: float


@dataclass(frozen=True)
class ConditionStats:
    mean: float
    median: float
    std: float  # population


@dataclass(frozen=True)
class StudyReport:
    rows: tuple[StudyRow, ...]
    aggregates: dict  # (metric, condition) -> ConditionStats
    hist_edges: np.ndarray  # 20 equal-width bins over the pooled delta range
    hist_orig: np.ndarray
    hist_pert: np.ndarray
    sign_p_gamma_increase: float
    sign_p_delta_drop: float
    delta_separation: float  # |mean gap| over pooled std
    heatmaps: tuple | None = None  # per sample: (orig variance map, pert variance map)


def black_patch(
    x: np.ndarray, size: int, seed: int | np.random.SeedSequence
) -> tuple[np.ndarray, tuple[int, int]]:
    """Zero out a random size x size patch; returns (image, (row, col)) origin.

    The origin is uniform over all valid placements under the given stream.
    """
    x = np.asarray(x)
    n, m = x.shape
    if size < 1 or size > min(n, m):
        raise InvalidArgument(f"patch size {size} does not fit a {n}x{m} image")
    rng = stream(seed)
    row = int(rng.integers(0, n - size + 1))
    col = int(rng.integers(0, m - size + 1))
    out = x.copy()
    out[row : row + size, col : col + size] = 0.0
    return out, (row, col)


def score_sample(
    model: CodecModel, x: np.ndarray, cfg: CorruptionConfig
) -> tuple[VarianceResult, ConfidenceResult, np.ndarray]:
    """Full scoring pipeline for one input image.

    Encode, decode the clean output, mask the background in latent space,
    draw k corrupted latents, decode them, and score variance and confidence.
    Returns (variance result, confidence result, per-pixel variance map).
    """
    h = encode(model, x)
    xhat = decode(model, h)
    mask = foreground_mask(xhat, cfg.foreground_threshold, h.shape[1], h.shape[2])
    corrupted = corrupt_latents(h, mask, cfg)
    variants = decode_batch(model, corrupted)
    if cfg.k >= 2:
        var_res = variance_score(variants)
    else:
        var_res = VarianceResult(map=np.zeros_like(xhat, dtype=np.float64), gamma=0.0)
    conf_res = confidence_score(xhat, variants)
    return var_res, conf_res, var_res.map


def _study_one(model, x, study: StudyConfig, idx: int) -> tuple[StudyRow, np.ndarray, np.ndarray]:
    cfg = replace(study.corruption, seed=substream_seq(study.corruption.seed, idx))
    size = study.patch_size if study.patch_size is not None else default_patch_size(x.shape[0])

    var_o, conf_o, map_o = score_sample(model, x, cfg)
    patched, (row, col) = black_patch(x, size, substream_seq(study.seed, idx))
    var_p, conf_p, map_p = score_sample(model, patched, cfg)

    patch_px = np.zeros(x.shape, dtype=bool)
    patch_px[row : row + size, col : col + size] = True
    overlap = float(np.mean(x[patch_px] > 0.0))
    return (
        StudyRow(
            sample_id=idx,
            patch_row=row,
            patch_col=col,
            patch_fg_overlap=overlap,
            gamma_orig=var_o.gamma,
            delta_orig=conf_o.delta,
            gamma_pert=var_p.gamma,
            delta_pert=conf_p.delta,
            var_in_patch=float(map_p[patch_px].mean()),
            var_out_patch=float(map_p[~patch_px].mean()),
        ),
        map_o,
        map_p,
    )


def paired_sign_test(diffs: list[float]) -> float:
    """One-sided exact sign test p-value for median(diff) > 0; ties dropped."""
    pos = sum(1 for d in diffs if d > 0)
    neg = sum(1 for d in diffs if d < 0)
    n = pos + neg
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, i) for i in range(pos, n + 1))
    return tail / 2.0**n


def _stats(values: list[float]) -> ConditionStats:
    a = np.asarray(values, dtype=np.float64)
    return ConditionStats(mean=float(a.mean()), median=float(np.median(a)), std=float(a.std()))


def run_perturbation_study(
    dataset: list, model: CodecModel, study: StudyConfig, jobs: int = 1
) -> StudyReport:
    """Score every dataset sample in both conditions and aggregate.

    ``dataset`` holds (image, mask) pairs or bare images; masks are ignored
    here. Rows follow dataset order whatever the worker count.
    """
    if not dataset:
        raise EmptyInput("dataset is empty")
    images = [s[0] if isinstance(s, tuple) else s for s in dataset]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(lambda t: _study_one(model, t[1], study, t[0]), enumerate(images))
            )
    else:
        results = [_study_one(model, x, study, i) for i, x in enumerate(images)]

    rows = tuple(r[0] for r in results)
    heatmaps = [(r[1], r[2]) for r in results]

    aggregates = {}
    for metric in ("gamma", "delta"):
        for cond in ("orig", "pert"):
            values = [getattr(r, f"{metric}_{cond}") for r in rows]
            aggregates[(metric, cond)] = _stats(values)

    deltas_o = [r.delta_orig for r in rows]
    deltas_p = [r.delta_pert for r in rows]
    pooled = deltas_o + deltas_p
    lo, hi = min(pooled), max(pooled)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, 21)
    hist_o = np.clip(((np.asarray(deltas_o) - lo) / (hi - lo) * 20).astype(int), 0, 19)
    hist_p = np.clip(((np.asarray(deltas_p) - lo) / (hi - lo) * 20).astype(int), 0, 19)
    hist_orig = np.bincount(hist_o, minlength=20)
    hist_pert = np.bincount(hist_p, minlength=20)

    pooled_std = math.sqrt(
        (aggregates[("delta", "orig")].std ** 2 + aggregates[("delta", "pert")].std ** 2) / 2.0
    )
    gap = aggregates[("delta", "orig")].mean - aggregates[("delta", "pert")].mean
    separation = abs(gap) / pooled_std if pooled_std > 0 else math.inf

    return StudyReport(
        rows=rows,
        aggregates=aggregates,
        hist_edges=edges,
        hist_orig=hist_orig,
        hist_pert=hist_pert,
        sign_p_gamma_increase=paired_sign_test([r.gamma_pert - r.gamma_orig for r in rows]),
        sign_p_delta_drop=paired_sign_test([r.delta_orig - r.delta_pert for r in rows]),
        delta_separation=separation,
        heatmaps=tuple(heatmaps),
    )


def write_study_outputs(report: StudyReport, out_dir) -> list[Path]:
    """Emit report.csv, aggregates.csv, hist_delta.csv and per-sample PGMs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report_csv = out_dir / "report.csv"
    tensor_io.write_csv(
        report_csv,
        [
            "sample_id",
            "patch_row",
            "patch_col",
            "patch_fg_overlap",
            "gamma_orig",
            "delta_orig",
            "gamma_pert",
            "delta_pert",
            "var_in_patch",
            "var_out_patch",
        ],
        [
            (
                r.sample_id,
                r.patch_row,
                r.patch_col,
                r.patch_fg_overlap,
                r.gamma_orig,
                r.delta_orig,
                r.gamma_pert,
                r.delta_pert,
                r.var_in_patch,
                r.var_out_patch,
            )
            for r in report.rows
        ],
    )
    written.append(report_csv)

    agg_csv = out_dir / "aggregates.csv"
    tensor_io.write_csv(
        agg_csv,
        ["metric", "condition", "mean", "median", "std"],
        [
            (metric, cond, s.mean, s.median, s.std)
            for (metric, cond), s in sorted(report.aggregates.items())
        ],
    )
    written.append(agg_csv)

    hist_csv = out_dir / "hist_delta.csv"
    tensor_io.write_csv(
        hist_csv,
        ["bin_lo", "bin_hi", "count_orig", "count_pert"],
        [
            (report.hist_edges[i], report.hist_edges[i + 1], report.hist_orig[i], report.hist_pert[i])
            for i in range(20)
        ],
    )
    written.append(hist_csv)

    if report.heatmaps is not None:
        for i, (map_o, map_p) in enumerate(report.heatmaps):
            for cond, m in (("orig", map_o), ("pert", map_p)):
                p = out_dir / f"heatmap_{cond}_{i:04d}.pgm"
                tensor_io.write_heatmap_pgm(p, m)
                written.append(p)
    return written
