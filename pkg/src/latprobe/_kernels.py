"""Hot numeric kernels: 2-D convolution forward passes and joint histograms.

Each kernel has a numba @njit implementation and a pure-numpy fallback written
with the same accumulation order, so both backends produce bit-identical
results. The numba path is used when importable; set LATPROBE_NUMPY_ONLY=1 to
force the numpy path (see benchmarks/bench_kernels.py for a comparison).
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("LATPROBE_NUMPY_ONLY", "").lower() in ("1", "true", "yes")

try:
    if _FORCE_NUMPY:
        raise ImportError("numpy backend forced via LATPROBE_NUMPY_ONLY")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False


def conv2d_numpy(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Cross-correlation of x (ci,h,w) with w (co,ci,kh,kw), zero padding.

    Accumulates in float64, one kernel tap at a time in (ic, ki, kj) order --
    the same order as the numba kernel, which keeps the two bit-identical.
    """
    ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    xp = np.zeros((ci, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    xp[:, pad : pad + h, pad : pad + wd] = x
    out = np.empty((co, ho, wo), dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    for oc in range(co):
        acc = np.full((ho, wo), float(b[oc]), dtype=np.float64)
        for ic in range(ci):
            for ki in range(kh):
                for kj in range(kw):
                    win = xp[ic, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride]
                    acc += w[oc, ic, ki, kj] * win
        out[oc] = acc
    return out


def joint_hist_numpy(a: np.ndarray, b: np.ndarray, bins: int, lo: float, hi: float) -> np.ndarray:
    """Joint counts of (a, b) over ``bins`` equal-width bins spanning [lo, hi].

    Bin index is floor((v - lo) * bins / (hi - lo)) clipped to bins - 1, which
    makes the top edge inclusive. Degenerate range puts all mass at (0, 0).
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if hi <= lo:
        counts = np.zeros((bins, bins), dtype=np.int64)
        counts[0, 0] = a.size
        return counts
    scale = bins / (hi - lo)
    ia = np.clip(((a - lo) * scale).astype(np.int64), 0, bins - 1)
    ib = np.clip(((b - lo) * scale).astype(np.int64), 0, bins - 1)
    flat = np.bincount(ia * bins + ib, minlength=bins * bins)
    return flat.reshape(bins, bins).astype(np.int64)


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _conv2d_jit(x, w, b, stride, pad):
        ci, h, wd = x.shape
        co, _, kh, kw = w.shape
        ho = (h + 2 * pad - kh) // stride + 1
        wo = (wd + 2 * pad - kw) // stride + 1
        xp = np.zeros((ci, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
        xp[:, pad : pad + h, pad : pad + wd] = x
        out = np.empty((co, ho, wo), dtype=np.float64)
        for oc in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = b[oc]
                    for ic in range(ci):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc = acc + w[oc, ic, ki, kj] * xp[ic, i * stride + ki, j * stride + kj]
                    out[oc, i, j] = acc
        return out

    @njit(cache=True, nogil=True)
    def _joint_hist_jit(a, b, bins, lo, hi):
        counts = np.zeros((bins, bins), dtype=np.int64)
        n = a.size
        if hi <= lo:
            counts[0, 0] = n
            return counts
        scale = bins / (hi - lo)
        for i in range(n):
            ia = int((a[i] - lo) * scale)
            if ia < 0:
                ia = 0
            elif ia > bins - 1:
                ia = bins - 1
            ib = int((b[i] - lo) * scale)
            if ib < 0:
                ib = 0
            elif ib > bins - 1:
                ib = bins - 1
            counts[ia, ib] += 1
        return counts

    def conv2d_numba(x, w, b, stride, pad):
        return _conv2d_jit(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(w, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            stride,
            pad,
        )

    def joint_hist_numba(a, b, bins, lo, hi):
        return _joint_hist_jit(
            np.ascontiguousarray(a, dtype=np.float64).ravel(),
            np.ascontiguousarray(b, dtype=np.float64).ravel(),
            bins,
            float(lo),
            float(hi),
        )

    BACKEND = "numba"
    conv2d = conv2d_numba
    joint_hist = joint_hist_numba
else:
    BACKEND = "numpy"
    conv2d_numba = None
    joint_hist_numba = None
    conv2d = conv2d_numpy
    joint_hist = joint_hist_numpy


def tconv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Transposed convolution of x (ci,h,w) with w (ci,co,kh,kw).

    Implemented as zero-stuffing by ``stride`` followed by a unit-stride
    convolution with the spatially flipped, axis-swapped kernel. Output size is
    (h - 1) * stride - 2 * pad + kh.
    """
    ci, h, wd = x.shape
    _, co, kh, kw = w.shape
    hs = (h - 1) * stride + 1
    ws = (wd - 1) * stride + 1
    stuffed = np.zeros((ci, hs, ws), dtype=np.float64)
    stuffed[:, ::stride, ::stride] = x
    w_flip = np.ascontiguousarray(np.transpose(w, (1, 0, 2, 3))[:, :, ::-1, ::-1])
    return conv2d(stuffed, w_flip, b, 1, kh - 1 - pad)


def backend() -> str:
    """Active kernel backend, 'numba' or 'numpy'."""
    return BACKEND
