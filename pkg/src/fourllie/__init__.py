"""Two-stage Fourier-domain low-light image enhancement.

Stage 1 brightens an image by estimating a per-bin amplitude transform map
in the frequency domain; stage 2 refines details with an encoder/decoder
whose global (frequency) and local (spatial) branches are blended by an
SNR prior map. Includes training, evaluation, diagnostics, and a CLI.
"""

from .blocks import FPBlock, SPBlock, block_param_count
from .data import (
    DatasetManifest,
    ImagePair,
    PairRecord,
    augment,
    load_image,
    load_manifest,
    load_pair,
    save_image,
    synth_tiny_dataset,
)
from .diagnostics import (
    amplitude_scale,
    amplitude_swap,
    appendix_a_variant,
    compare_appendix_settings,
    make_appendix_variant,
    mean_luminance,
    train_appendix_variant,
)
from .errors import (
    CheckpointError,
    ConfigMismatchError,
    ConjugateSymmetryError,
    CorruptCheckpointError,
    DatasetError,
    FourLLIEError,
    InvalidConfigError,
    InvalidInputError,
    TrainingDivergedError,
)
from .fourier import (
    forward_transform,
    from_amplitude_phase,
    inverse_transform,
    recombine_image,
    to_amplitude_phase,
)
from .losses import (
    LossWeights,
    TinyFeatureExtractor,
    Vgg19FeatureExtractor,
    default_extractor,
    load_extractor,
    loss_s1,
    loss_s2,
    save_extractor,
    total_loss,
)
from .metrics import EvalReport, EvalRow, psnr, ssim
from .model import (
    FourLLIE,
    FrequencyStage,
    ModelConfig,
    SpatialStage,
    StageOutputs,
    apply_amplitude_map,
    apply_exposure_maps,
    build_model,
    count_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .snr import compute_snr_map, resize_map
from .trainer import TrainConfig, TrainResult, evaluate, load_config_file, lr_for_iteration, train

__version__ = "0.1.0"

__all__ = [
    "FPBlock",
    "SPBlock",
    "block_param_count",
    "DatasetManifest",
    "ImagePair",
    "PairRecord",
    "augment",
    "load_image",
    "load_manifest",
    "load_pair",
    "save_image",
    "synth_tiny_dataset",
    "amplitude_scale",
    "amplitude_swap",
    "appendix_a_variant",
    "compare_appendix_settings",
    "make_appendix_variant",
    "mean_luminance",
    "train_appendix_variant",
    "CheckpointError",
    "ConfigMismatchError",
    "ConjugateSymmetryError",
    "CorruptCheckpointError",
    "DatasetError",
    "FourLLIEError",
    "InvalidConfigError",
    "InvalidInputError",
    "TrainingDivergedError",
    "forward_transform",
    "from_amplitude_phase",
    "inverse_transform",
    "recombine_image",
    "to_amplitude_phase",
    "LossWeights",
    "TinyFeatureExtractor",
    "Vgg19FeatureExtractor",
    "default_extractor",
    "load_extractor",
    "loss_s1",
    "loss_s2",
    "save_extractor",
    "total_loss",
    "EvalReport",
    "EvalRow",
    "psnr",
    "ssim",
    "FourLLIE",
    "FrequencyStage",
    "ModelConfig",
    "SpatialStage",
    "StageOutputs",
    "apply_amplitude_map",
    "apply_exposure_maps",
    "build_model",
    "count_parameters",
    "load_checkpoint",
    "save_checkpoint",
    "compute_snr_map",
    "resize_map",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "load_config_file",
    "lr_for_iteration",
    "train",
]
