"""Command-line surface.

Subcommands: gen (phantom dataset), score (single image), perturb
(black-patch study), correlate (confidence vs DICE study), filter (threshold
a report CSV). Every command that writes does so under one --out directory
and leaves a manifest.txt recording the tool version, the resolved settings,
and content hashes of inputs and outputs. Re-running a command with
``--config <manifest>`` reproduces the outputs byte for byte; explicit flags
override manifest values.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__, tensor_io
from ._kernels import backend
from .corruption import CorruptionConfig
from .downstream import (
    CorrelationConfig,
    make_threshold_segmenter,
    run_correlation_study,
    threshold_filter,
    write_correlation_outputs,
)
from .errors import InvalidArgument, IoError, LatprobeError
from .model import build_linear_codec, load_model
from .perturb import StudyConfig, run_perturbation_study, score_sample, write_study_outputs
from .synthdata import PhantomSpec, dump_phantom_dir, generate_phantoms, load_phantom_dir

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.txt"


def _toy_codec_dir() -> Path:
    from importlib.resources import files

    return Path(str(files("latprobe") / "assets" / "toy_codec"))


def resolve_model(spec: str):
    """Map a --model value to a codec: 'linear', 'toy', or a directory path."""
    if spec == "linear":
        return build_linear_codec()
    if spec == "toy":
        return load_model(_toy_codec_dir())
    return load_model(spec)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_config(path) -> dict[str, str]:
    """Parse a key=value config/manifest file; '#' starts a comment line."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgument(f"{path}: bad config line {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_manifest(out_dir: Path, command: str, settings: dict, inputs: list, outputs: list) -> Path:
    """Emit manifest.txt: versioned key=value snapshot plus content hashes."""
    lines = [
        f"manifest_version={MANIFEST_VERSION}",
        "tool=latprobe",
        f"tool_version={__version__}",
        f"command={command}",
        f"kernel_backend={backend()}",
    ]
    for key in sorted(settings):
        lines.append(f"arg.{key}={settings[key]}")
    for p in sorted(Path(p) for p in inputs):
        lines.append(f"input.{p}={_sha256(p)}")
    for p in sorted(Path(p) for p in outputs):
        lines.append(f"output.{p.relative_to(out_dir)}={_sha256(p)}")
    path = out_dir / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n")
    return path


def prepare_out_dir(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise IoError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


class _Resolver:
    """Flag values beat config-file values beat hard defaults."""

    def __init__(self, args, config: dict[str, str]):
        self.args = args
        self.config = config
        self.settings: dict[str, str] = {}

    def get(self, name: str, typ, default):
        v = getattr(self.args, name.replace("-", "_"))
        if v is None:
            raw = self.config.get(f"arg.{name}")
            v = typ(raw) if raw is not None else default
        else:
            v = typ(v)
        self.settings[name] = str(v)
        return v


def _parse_levels(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(t) for t in text.split(",") if t.strip() != "")
    except ValueError as e:
        raise InvalidArgument(f"bad --damage-levels value {text!r}") from e
    if not levels:
        raise InvalidArgument("--damage-levels is empty")
    return levels


# --- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    config = read_config(args.config) if args.config else {}
    r = _Resolver(args, config)
    count = r.get("count", int, 64)
    side = r.get("side", int, 64)
    seed = r.get("seed", int, 0)
    out = prepare_out_dir(args.out, args.force)

    spec = PhantomSpec(count=count, image_side=side, seed=seed)
    written = dump_phantom_dir(out, generate_phantoms(spec))
    write_manifest(out, "gen", r.settings, [], written)
    print(f"count={count} side={side} out={out}")
    return 0


def cmd_score(args) -> int:
    config = read_config(args.config) if args.config else {}
    r = _Resolver(args, config)
    model_spec = r.get("model", str, "toy")
    image_path = r.get("image", str, None)
    alpha = r.get("alpha", float, 3.0)
    k = r.get("k", int, 10)
    seed = r.get("seed", int, 0)
    fg_threshold = r.get("fg-threshold", float, 0.0)
    if image_path is None:
        raise InvalidArgument("--image is required")

    model = resolve_model(model_spec)
    image = tensor_io.read_array(image_path)
    cfg = CorruptionConfig(alpha=alpha, k=k, seed=seed, foreground_threshold=fg_threshold)
    var_res, conf_res, heat = score_sample(model, image, cfg)

    outputs = []
    if args.out:
        out = prepare_out_dir(args.out, args.force)
        pgm = out / "heatmap.pgm"
        tensor_io.write_heatmap_pgm(pgm, heat)
        outputs.append(pgm)
        write_manifest(out, "score", r.settings, [Path(image_path)], outputs)
    print(f"gamma={tensor_io.fmt_value(var_res.gamma)} delta={tensor_io.fmt_value(conf_res.delta)}")
    return 0


def cmd_perturb(args) -> int:
    config = read_config(args.config) if args.config else {}
    r = _Resolver(args, config)
    data = r.get("data", str, None)
    model_spec = r.get("model", str, "toy")
    alpha = r.get("alpha", float, 3.0)
    k = r.get("k", int, 10)
    seed = r.get("seed", int, 0)
    patch_seed = r.get("patch-seed", int, 1)
    patch = r.get("patch", int, 0)  # 0: scale the reference ratio to the image
    fg_threshold = r.get("fg-threshold", float, 0.0)
    jobs = r.get("jobs", int, 1)
    if data is None:
        raise InvalidArgument("--data is required")

    model = resolve_model(model_spec)
    dataset = load_phantom_dir(data)
    study = StudyConfig(
        corruption=CorruptionConfig(alpha=alpha, k=k, seed=seed, foreground_threshold=fg_threshold),
        patch_size=patch if patch > 0 else None,
        seed=patch_seed,
    )
    out = prepare_out_dir(args.out, args.force)
    report = run_perturbation_study(dataset, model, study, jobs=jobs)
    written = write_study_outputs(report, out)
    inputs = sorted(Path(data).glob("*.npy")) + [Path(data) / "index.csv"]
    write_manifest(out, "perturb", r.settings, inputs, written)

    ago = report.aggregates[("gamma", "orig")]
    agp = report.aggregates[("gamma", "pert")]
    ado = report.aggregates[("delta", "orig")]
    adp = report.aggregates[("delta", "pert")]
    print(
        f"samples={len(report.rows)} "
        f"gamma_orig={tensor_io.fmt_value(ago.mean)} gamma_pert={tensor_io.fmt_value(agp.mean)} "
        f"delta_orig={tensor_io.fmt_value(ado.mean)} delta_pert={tensor_io.fmt_value(adp.mean)} "
        f"sign_p_gamma={tensor_io.fmt_value(report.sign_p_gamma_increase)} "
        f"sign_p_delta={tensor_io.fmt_value(report.sign_p_delta_drop)} "
        f"separation={tensor_io.fmt_value(report.delta_separation)}"
    )
    return 0


def cmd_correlate(args) -> int:
    config = read_config(args.config) if args.config else {}
    r = _Resolver(args, config)
    data = r.get("data", str, None)
    model_spec = r.get("model", str, "toy")
    segmenter_name = r.get("segmenter", str, "default")
    seg_threshold = r.get("seg-threshold", float, 0.92)
    levels = _parse_levels(r.get("damage-levels", str, "0,0.5,1,2,4,8"))
    alpha = r.get("alpha", float, 3.0)
    k = r.get("k", int, 10)
    seed = r.get("seed", int, 0)
    damage_seed = r.get("damage-seed", int, 2)
    fg_threshold = r.get("fg-threshold", float, 0.0)
    jobs = r.get("jobs", int, 1)
    if data is None:
        raise InvalidArgument("--data is required")
    if segmenter_name not in ("default", "oracle"):
        raise InvalidArgument(f"unknown segmenter {segmenter_name!r}")

    model = resolve_model(model_spec)
    dataset = load_phantom_dir(data)
    segmenter = "oracle" if segmenter_name == "oracle" else make_threshold_segmenter(seg_threshold)
    cfg = CorrelationConfig(
        corruption=CorruptionConfig(alpha=alpha, k=k, seed=seed, foreground_threshold=fg_threshold),
        damage_levels=levels,
        damage_seed=damage_seed,
    )
    out = prepare_out_dir(args.out, args.force)
    report = run_correlation_study(dataset, model, segmenter, cfg, jobs=jobs)
    written = write_correlation_outputs(report, out)
    inputs = sorted(Path(data).glob("*.npy")) + [Path(data) / "index.csv"]
    write_manifest(out, "correlate", r.settings, inputs, written)

    r_s = "" if report.pearson_r is None else tensor_io.fmt_value(report.pearson_r)
    abs_s = "" if report.abs_r is None else tensor_io.fmt_value(report.abs_r)
    print(
        f"n={report.n} pearson_r={r_s} abs_r={abs_s} status={report.status} "
        f"n_degraded={report.n_degraded} degraded_flag={int(report.degraded_flag)}"
    )
    return 0


def cmd_filter(args) -> int:
    config = read_config(args.config) if args.config else {}
    r = _Resolver(args, config)
    report_path = r.get("report", str, None)
    cutoff = r.get("cutoff", float, None)
    column = r.get("column", str, "delta")
    if report_path is None or cutoff is None:
        raise InvalidArgument("--report and --cutoff are required")

    header, rows = tensor_io.read_csv(report_path)
    if column not in header or "sample_id" not in header:
        raise InvalidArgument(f"{report_path}: need 'sample_id' and {column!r} columns")
    id_i = header.index("sample_id")
    val_i = header.index(column)
    samples = []
    for row in rows:
        if "row_type" in header and row[header.index("row_type")] != "pair":
            continue
        samples.append((row[id_i], float(row[val_i])))
    kept, rejected = threshold_filter(samples, cutoff)

    if args.out:
        out = prepare_out_dir(args.out, args.force)
        kept_csv = out / "kept.csv"
        rej_csv = out / "rejected.csv"
        tensor_io.write_csv(kept_csv, ["sample_id"], [(s,) for s in kept])
        tensor_io.write_csv(rej_csv, ["sample_id"], [(s,) for s in rejected])
        write_manifest(out, "filter", r.settings, [Path(report_path)], [kept_csv, rej_csv])
    print(f"kept={len(kept)} rejected={len(rejected)}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latprobe",
        description="Latent-corruption uncertainty and confidence scoring for image codecs",
    )
    parser.add_argument("--version", action="version", version=f"latprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="key=value config or manifest to take defaults from")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--out", help="output directory")
        p.add_argument("--force", action="store_true", help="allow writing into a non-empty --out")

    p = sub.add_parser("gen", help="generate a phantom dataset directory")
    p.add_argument("--count", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("score", help="score one image: prints gamma=<v> delta=<v>")
    p.add_argument("--model", help="'toy', 'linear', or a model directory")
    p.add_argument("--image", help="NPY image in [0,1]")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fg-threshold", type=float)
    common(p, needs_out=False)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("perturb", help="black-patch study over a dataset")
    p.add_argument("--data", help="dataset directory from 'gen'")
    p.add_argument("--model")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--patch-seed", type=int)
    p.add_argument("--patch", type=int, help="patch side in pixels (0 = scale 50/256 ratio)")
    p.add_argument("--fg-threshold", type=float)
    p.add_argument("--jobs", type=int)
    common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("correlate", help="confidence vs DICE study with graded latent damage")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--segmenter", choices=["default", "oracle"])
    p.add_argument("--seg-threshold", type=float)
    p.add_argument("--damage-levels", help="comma-separated ascending levels")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--damage-seed", type=int)
    p.add_argument("--fg-threshold", type=float)
    p.add_argument("--jobs", type=int)
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("filter", help="split a report CSV at a confidence cutoff")
    p.add_argument("--report", help="CSV with sample_id and a score column")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--column", help="score column name (default: delta)")
    common(p, needs_out=False)
    p.set_defaults(func=cmd_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LatprobeError as e:
        print(f"latprobe {args.command}: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"latprobe {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
