"""Latent-corruption robustness scoring for encoder/decoder image models."""

__version__ = "0.1.0"

from .corruption import CorruptionConfig, channel_std, corrupt_latents, foreground_mask
from .downstream import (
    CorrelationConfig,
    CorrelationReport,
    dice,
    pearson,
    run_correlation_study,
    threshold_filter,
)
from .model import (
    CodecModel,
    Layer,
    build_linear_codec,
    build_toy_conv_codec,
    decode,
    decode_batch,
    encode,
    load_model,
    save_model,
)
from .perturb import (
    StudyConfig,
    StudyReport,
    black_patch,
    run_perturbation_study,
    score_sample,
)
from .scores import (
    ConfidenceResult,
    VarianceResult,
    confidence_score,
    joint_histogram,
    marginal_entropy,
    mutual_information,
    num_bins,
    variance_score,
)
from .synthdata import PhantomSpec, generate_phantoms, grade_damage
