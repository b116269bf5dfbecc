"""Mixed-dataset image quality model.

One dataset-shared quality regressor (bilinear pooling + MLP head) learns a
common quality scale from several datasets at once; one strictly monotone
calibrator per dataset maps that scale onto the dataset's own annotation
range during training. At test time only the shared regressor runs.
"""

from .config import TrainConfig, load_config
from .data import (
    DatasetManifest,
    SampleRecord,
    SplitAssignment,
    load_all_manifests,
    make_batches,
    read_feature_file,
    rescale_mos,
    split_by_content,
    write_feature_file,
)
from .layers import DualBuffer, bilinear_pool, elu, finite_diff_check, linear_forward, relu
from .losses import combined_loss, nin_loss, smooth_l1
from .metrics import (
    CorrelationResult,
    WeightedReport,
    median_over_splits,
    plcc,
    srcc,
    weighted_report,
)
from .model import QualityModel, build_model, predict
from .monotone import MonotonicTransformer, transformer_init
from .checkpoint import load_checkpoint, save_checkpoint
from .regressor import RegressorHead, head_init, regressor_forward
from .synth import SynthConfig, default_synth_config, generate
from .train import FeatureStore, ablate_depth, evaluate, make_splits, multi_split_eval, train

__version__ = "0.1.0"

__all__ = [
    "TrainConfig",
    "load_config",
    "DatasetManifest",
    "SampleRecord",
    "SplitAssignment",
    "load_all_manifests",
    "make_batches",
    "read_feature_file",
    "rescale_mos",
    "split_by_content",
    "write_feature_file",
    "DualBuffer",
    "bilinear_pool",
    "elu",
    "finite_diff_check",
    "linear_forward",
    "relu",
    "combined_loss",
    "nin_loss",
    "smooth_l1",
    "CorrelationResult",
    "WeightedReport",
    "median_over_splits",
    "plcc",
    "srcc",
    "weighted_report",
    "QualityModel",
    "build_model",
    "predict",
    "MonotonicTransformer",
    "transformer_init",
    "load_checkpoint",
    "save_checkpoint",
    "RegressorHead",
    "head_init",
    "regressor_forward",
    "SynthConfig",
    "default_synth_config",
    "generate",
    "FeatureStore",
    "ablate_depth",
    "evaluate",
    "make_splits",
    "multi_split_eval",
    "train",
]
