"""Coupled kernel dimensionality reduction with a Rademacher bounds lab."""

from .constraints import ConstraintParams, FeasibilityReport, check_M, check_N, kappa, project_to_M
from .data import Dataset, load_dataset
from .kernels import KernelSpec, eval_kernel, gram, normalize_spec, normalized_gram
from .model import Model, c_feature, evaluate, load_model, margin_loss, predict, save_model
from .spectral import (
    SpectralBundle,
    build_bundle,
    eigendecompose,
    eigengap_plugin,
    kyfan_r,
    projected_sigma_norm,
    top_r_index_set,
    union_spectrum,
)
from .trainer import TrainConfig, TrainTrace, train

__version__ = "0.1.0"

__all__ = [
    "ConstraintParams",
    "Dataset",
    "FeasibilityReport",
    "KernelSpec",
    "Model",
    "SpectralBundle",
    "TrainConfig",
    "TrainTrace",
    "build_bundle",
    "c_feature",
    "check_M",
    "check_N",
    "eigendecompose",
    "eigengap_plugin",
    "eval_kernel",
    "evaluate",
    "gram",
    "kappa",
    "kyfan_r",
    "load_dataset",
    "load_model",
    "margin_loss",
    "normalize_spec",
    "normalized_gram",
    "predict",
    "project_to_M",
    "projected_sigma_norm",
    "save_model",
    "top_r_index_set",
    "train",
    "union_spectrum",
]
