"""On-disk array, image, and table formats.

The only module that touches bytes on disk. Arrays use the NPY v1.0 layout
restricted to little-endian float32 ('<f4') and uint8 ('|u1'), C order, rank
1-3. Heatmaps go out as binary PGM (P5). Tables are plain CSV with '.'
decimals, ',' separators, a header row, and 6 significant digits.
"""

from __future__ import annotations

import ast
import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, FormatError, InvalidArgument, IoError, UnsupportedDtype

_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCR = {"<f4": np.dtype("<f4"), "|u1": np.dtype("|u1")}
_HEADER_ALIGN = 64


def _header_bytes(descr: str, shape: tuple[int, ...]) -> bytes:
    if len(shape) == 1:
        shape_s = f"({shape[0]},)"
    else:
        shape_s = "(" + ", ".join(str(s) for s in shape) + ")"
    body = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_s}, }}"
    # magic(6) + version(2) + header-len(2) + body + padding + '\n', 64-aligned
    unpadded = len(_MAGIC) + 2 + 2 + len(body) + 1
    padding = (-unpadded) % _HEADER_ALIGN
    body = body + " " * padding + "\n"
    return _MAGIC + b"\x01\x00" + len(body).to_bytes(2, "little") + body.encode("latin1")


def write_array(path, t: np.ndarray) -> None:
    """Write ``t`` as an NPY v1.0 file. Byte-stable for identical input."""
    t = np.asarray(t)
    if t.dtype == np.float32:
        descr = "<f4"
    elif t.dtype == np.uint8:
        descr = "|u1"
    else:
        raise UnsupportedDtype(f"only float32 and uint8 arrays are written, got {t.dtype}")
    if t.ndim not in (1, 2, 3):
        raise InvalidArgument(f"array rank must be 1, 2 or 3, got {t.ndim}")
    if t.dtype == np.float32 and not np.all(np.isfinite(t)):
        raise InvalidArgument("array contains non-finite values")
    blob = _header_bytes(descr, t.shape) + np.ascontiguousarray(t).tobytes("C")
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_array(path) -> np.ndarray:
    """Read an NPY v1.0 file written by :func:`write_array` (or numpy itself)."""
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(blob) < 10 or blob[: len(_MAGIC)] != _MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    if blob[6:8] != b"\x01\x00":
        raise FormatError(f"{path}: unsupported format version {blob[6]}.{blob[7]}")
    hlen = int.from_bytes(blob[8:10], "little")
    if len(blob) < 10 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(blob[10 : 10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as e:
        raise FormatError(f"{path}: unparseable header") from e
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: malformed header dict")
    if header["fortran_order"] is not False:
        raise FormatError(f"{path}: fortran_order arrays are not supported")
    descr = header["descr"]
    if descr not in _SUPPORTED_DESCR:
        raise UnsupportedDtype(f"{path}: unsupported dtype descriptor {descr!r}")
    shape = header["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) not in (1, 2, 3)
        or not all(isinstance(s, int) and s > 0 for s in shape)
    ):
        raise FormatError(f"{path}: unsupported shape {shape!r}")
    dtype = _SUPPORTED_DESCR[descr]
    expected = int(np.prod(shape)) * dtype.itemsize
    payload = blob[10 + hlen :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header shape {shape} needs {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_heatmap_pgm(path, m: np.ndarray) -> None:
    """Write a per-pixel map as binary PGM (P5, maxval 255).

    Values are min-max normalized to [0, 255] with round-half-up; a constant
    map comes out all zeros. The absolute scale belongs in the CSV reports.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise EmptyInput("heatmap must be a non-empty 2-D map")
    lo = float(m.min())
    hi = float(m.max())
    if hi > lo:
        scaled = (m - lo) * (255.0 / (hi - lo))
        pixels = np.floor(scaled + 0.5).astype(np.uint8)
    else:
        pixels = np.zeros(m.shape, dtype=np.uint8)
    h, w = m.shape
    try:
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (w, h))
            f.write(pixels.tobytes("C"))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def fmt_value(v) -> str:
    """Canonical cell formatting: 6 significant digits for floats."""
    if isinstance(v, float) or isinstance(v, np.floating):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.6g}"
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV table with the package's fixed conventions."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt_value(v) for v in row])
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read back a CSV written by :func:`write_csv` (header, rows of strings)."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            rows = list(reader)
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], rows[1:]
