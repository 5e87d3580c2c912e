"""Encoder/decoder codecs used to exercise the scoring pipeline.

A codec is an ordered list of layer descriptors on each side. Two built-ins
are provided: a per-pixel linear channel-mixing codec (analytically
tractable) and a small strided-conv codec with a sigmoid output (exercises
spatial downsampling, so the latent grid is coarser than the image).

Forward passes are deterministic and reentrant; models are immutable after
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor_io
from ._kernels import conv2d, tconv2d
from ._rng import stream
from .errors import EmptyInput, FormatError, InvalidArgument, ShapeError

MODEL_FORMAT = 1
TOY_SEED = 7314
LINEAR_CHANNELS = 8

_ACTIVATIONS = ("relu", "sigmoid")
_KINDS = ("linear", "conv", "transposed_conv") + _ACTIVATIONS


@dataclass(frozen=True)
class Layer:
    kind: str
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgument(f"unknown layer kind {self.kind!r}")
        if self.kind in _ACTIVATIONS:
            if self.weight is not None or self.bias is not None:
                raise InvalidArgument(f"{self.kind} layers carry no weights")
            return
        w = self.weight
        if w is None:
            raise InvalidArgument(f"{self.kind} layer needs a weight array")
        if self.kind == "linear" and w.ndim != 2:
            raise InvalidArgument(f"linear weight must be (out, in), got {w.shape}")
        if self.kind in ("conv", "transposed_conv"):
            if w.ndim != 4:
                raise InvalidArgument(f"{self.kind} weight must be 4-D, got {w.shape}")
            if w.shape[2] != w.shape[3]:
                raise InvalidArgument(f"only square kernels are supported, got {w.shape}")
            if not 0 <= self.padding <= w.shape[2] - 1:
                raise InvalidArgument(f"padding {self.padding} out of range for kernel {w.shape}")
        n_out = w.shape[0] if self.kind != "transposed_conv" else w.shape[1]
        if self.bias is not None and self.bias.shape != (n_out,):
            raise InvalidArgument(f"bias shape {self.bias.shape} does not match {n_out} outputs")

    @property
    def in_channels(self) -> int:
        if self.kind == "transposed_conv":
            return self.weight.shape[0]
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        if self.kind == "transposed_conv":
            return self.weight.shape[1]
        return self.weight.shape[0]


@dataclass(frozen=True)
class CodecModel:
    name: str
    encoder_layers: tuple[Layer, ...]
    decoder_layers: tuple[Layer, ...]

    def __post_init__(self):
        _check_composition(self.encoder_layers, "encoder")
        _check_composition(self.decoder_layers, "decoder")

    @property
    def latent_channels(self) -> int:
        for layer in reversed(self.encoder_layers):
            if layer.kind not in _ACTIVATIONS:
                return layer.out_channels
        raise InvalidArgument("encoder has no weighted layer")


def _check_composition(layers, side: str) -> None:
    if not layers:
        raise InvalidArgument(f"{side} must have at least one layer")
    channels = None
    for layer in layers:
        if layer.kind in _ACTIVATIONS:
            continue
        if channels is not None and layer.in_channels != channels:
            raise InvalidArgument(
                f"{side}: layer expects {layer.in_channels} channels, previous emits {channels}"
            )
        channels = layer.out_channels


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    # explicit channel accumulation keeps results independent of BLAS threading
    co, ci = w.shape
    out = np.empty((co,) + x.shape[1:], dtype=np.float64)
    for oc in range(co):
        acc = np.full(x.shape[1:], 0.0 if b is None else float(b[oc]), dtype=np.float64)
        for ic in range(ci):
            acc += float(w[oc, ic]) * x[ic]
        out[oc] = acc
    return out


def _forward(layers, x: np.ndarray) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    for layer in layers:
        if layer.kind == "relu":
            out = np.maximum(out, 0.0)
        elif layer.kind == "sigmoid":
            out = 1.0 / (1.0 + np.exp(-out))
        elif layer.kind == "linear":
            out = _linear(out, layer.weight, layer.bias)
        else:
            w = layer.weight.astype(np.float64)
            b = (
                layer.bias.astype(np.float64)
                if layer.bias is not None
                else np.zeros(layer.out_channels)
            )
            if out.shape[0] != layer.in_channels:
                raise ShapeError(
                    f"layer expects {layer.in_channels} input channels, got {out.shape[0]}"
                )
            if layer.kind == "conv":
                out = conv2d(out, w, b, layer.stride, layer.padding)
            else:
                out = tconv2d(out, w, b, layer.stride, layer.padding)
    return out


def encode(model: CodecModel, x: np.ndarray) -> np.ndarray:
    """Forward the encoder: 2-D image in [0,1] -> (channels, h, w) latent."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"image must be 2-D, got shape {x.shape}")
    first = next(l for l in model.encoder_layers if l.kind not in _ACTIVATIONS)
    if first.in_channels != 1:
        raise ShapeError(f"encoder expects {first.in_channels} input channels")
    latent = _forward(model.encoder_layers, x[None, :, :])
    return latent.astype(np.float32)


def decode(model: CodecModel, h: np.ndarray) -> np.ndarray:
    """Forward the decoder: latent -> 2-D image, clamped to [0, 1]."""
    h = np.asarray(h)
    if h.ndim != 3:
        raise ShapeError(f"latent must be 3-D, got shape {h.shape}")
    if h.shape[0] != model.latent_channels:
        raise ShapeError(f"latent has {h.shape[0]} channels, model expects {model.latent_channels}")
    out = _forward(model.decoder_layers, h)
    if out.shape[0] != 1:
        raise ShapeError(f"decoder emitted {out.shape[0]} channels, expected 1")
    return np.clip(out[0], 0.0, 1.0).astype(np.float32)


def decode_batch(model: CodecModel, hs: list[np.ndarray]) -> list[np.ndarray]:
    """Decode every latent in order; elementwise equal to mapping decode."""
    if not hs:
        raise EmptyInput("decode_batch needs at least one latent")
    return [decode(model, h) for h in hs]


# --- built-in codecs -------------------------------------------------------


def build_linear_codec(channels: int = LINEAR_CHANNELS) -> CodecModel:
    """Per-pixel channel-mixing codec with exact identity reconstruction.

    Encoder lifts each pixel to ``channels`` values with distinct gains (so
    channel stds differ); the decoder weights are normalized so that
    decode(encode(x)) == x for x in [0, 1]. No activations, so the decoder is
    affine: output noise variance has the closed form sum_c w_c^2 * var_c.
    """
    gains = np.linspace(0.4, 1.2, channels, dtype=np.float64)
    w_enc = gains[:, None].astype(np.float32)
    w_dec = (gains / np.sum(gains**2))[None, :].astype(np.float32)
    enc = Layer("linear", weight=w_enc, bias=np.zeros(channels, dtype=np.float32))
    dec = Layer("linear", weight=w_dec, bias=np.zeros(1, dtype=np.float32))
    return CodecModel("linear", (enc,), (dec,))


def build_toy_conv_codec(seed: int = TOY_SEED, channels: int = 8) -> CodecModel:
    """Small strided-conv codec: 64x64 image -> (channels, 32, 32) latent.

    Weights come from a fixed seeded initializer: structured kernels
    (averaging downsample, near-identity mixing, bilinear-style upsample) with
    per-channel gains and mild jitter. The output gain pushes bright content
    toward the saturated part of the sigmoid while empty regions decode to
    mid-gray, which is what makes content removal visible to the scores.
    """
    rng = stream(seed)
    gains = np.linspace(0.8, 1.6, channels)

    # encoder conv 1: 4x4 averaging kernels, stride 2 (side/2), per-channel gain
    base = np.full((4, 4), 1.0 / 16.0)
    w1 = np.empty((channels, 1, 4, 4))
    for c in range(channels):
        w1[c, 0] = base * gains[c] * (1.0 + 0.08 * rng.standard_normal((4, 4)))

    # encoder conv 2: near-identity channel mixing, 3x3
    w2 = 0.02 * rng.standard_normal((channels, channels, 3, 3))
    for c in range(channels):
        w2[c, c, 1, 1] += 1.0

    # decoder tconv 1: near-identity channel mixing, 3x3
    w3 = 0.02 * rng.standard_normal((channels, channels, 3, 3))
    for c in range(channels):
        w3[c, c, 1, 1] += 1.0

    # decoder tconv 2: bilinear-style 4x4 upsample back to the image grid,
    # channel contributions normalized so overall logit gain is ~4 per unit input
    ramp = np.array([1.0, 3.0, 3.0, 1.0]) / 4.0
    up = np.outer(ramp, ramp)
    out_gain = 4.0
    mix = gains / np.sum(gains**2)
    w4 = np.empty((channels, 1, 4, 4))
    for c in range(channels):
        w4[c, 0] = up * out_gain * mix[c] * (1.0 + 0.05 * rng.standard_normal((4, 4)))

    zeros = lambda n: np.zeros(n, dtype=np.float32)
    enc = (
        Layer("conv", w1.astype(np.float32), zeros(channels), stride=2, padding=1),
        Layer("relu"),
        Layer("conv", w2.astype(np.float32), zeros(channels), stride=1, padding=1),
    )
    dec = (
        Layer("transposed_conv", w3.astype(np.float32), zeros(channels), stride=1, padding=1),
        Layer("relu"),
        Layer("transposed_conv", w4.astype(np.float32), zeros(1), stride=2, padding=1),
        Layer("sigmoid"),
    )
    return CodecModel("toy_conv", enc, dec)


# --- model directory format ------------------------------------------------


def save_model(path, model: CodecModel) -> None:
    """Write a model directory: model.json manifest plus one NPY per array."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {"format": MODEL_FORMAT, "name": model.name, "encoder": [], "decoder": []}
    for side, layers in (("encoder", model.encoder_layers), ("decoder", model.decoder_layers)):
        for i, layer in enumerate(layers):
            entry = {"kind": layer.kind}
            if layer.kind not in _ACTIVATIONS:
                entry["stride"] = layer.stride
                entry["padding"] = layer.padding
                wname = f"{side}_{i}_weight.npy"
                tensor_io.write_array(path / wname, layer.weight.astype(np.float32))
                entry["weight"] = wname
                entry["weight_shape"] = list(layer.weight.shape)
                if layer.bias is not None:
                    bname = f"{side}_{i}_bias.npy"
                    tensor_io.write_array(path / bname, layer.bias.astype(np.float32))
                    entry["bias"] = bname
                    entry["bias_shape"] = list(layer.bias.shape)
            manifest[side].append(entry)
    (path / "model.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_model(path) -> CodecModel:
    """Load a model directory written by :func:`save_model`."""
    path = Path(path)
    mpath = path / "model.json"
    if not mpath.is_file():
        raise FormatError(f"{path}: missing model.json")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{mpath}: invalid JSON") from e
    if manifest.get("format") != MODEL_FORMAT:
        raise FormatError(f"{mpath}: unsupported model format {manifest.get('format')!r}")

    def load_side(side: str) -> tuple[Layer, ...]:
        layers = []
        for entry in manifest.get(side, []):
            kind = entry["kind"]
            if kind in _ACTIVATIONS:
                layers.append(Layer(kind))
                continue
            wfile = path / entry["weight"]
            if not wfile.is_file():
                raise FormatError(f"{mpath}: references missing weight file {entry['weight']}")
            weight = tensor_io.read_array(wfile)
            if list(weight.shape) != entry.get("weight_shape"):
                raise FormatError(
                    f"{mpath}: {entry['weight']} has shape {list(weight.shape)}, "
                    f"manifest says {entry.get('weight_shape')}"
                )
            bias = None
            if "bias" in entry:
                bfile = path / entry["bias"]
                if not bfile.is_file():
                    raise FormatError(f"{mpath}: references missing bias file {entry['bias']}")
                bias = tensor_io.read_array(bfile)
                if list(bias.shape) != entry.get("bias_shape"):
                    raise FormatError(f"{mpath}: {entry['bias']} shape mismatch")
            layers.append(
                Layer(kind, weight, bias, stride=entry.get("stride", 1), padding=entry.get("padding", 0))
            )
        return tuple(layers)

    try:
        return CodecModel(manifest.get("name", "model"), load_side("encoder"), load_side("decoder"))
    except InvalidArgument as e:
        raise FormatError(f"{mpath}: {e}") from e
