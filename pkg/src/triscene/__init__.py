"""Tri-level ensemble scene classification with built-in explanations."""

from .classifier import SoftmaxClassifier, load_checkpoint, save_checkpoint
from .config import EngineConfig, load_config, reference_config, reference_world, save_config
from .dataset import SceneDataset
from .ensemble import EnsembleClassifier, build_meta_input, compute_weights
from .errors import ConfigError, DataError, NumericError, TrisceneError
from .explain import Explanation, explain_scene
from .features import (
    build_high_level,
    build_mid_level,
    center_color,
    grid_position,
    mask_segment,
    set_count,
)
from .scene import (
    Detection,
    DetectionSet,
    HighLevelFeature,
    MidLevelFeature,
    SceneInstance,
    SegmentationMap,
)
from .submodel import SubModel
from .synthetic import SyntheticWorldSpec, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "Detection",
    "DetectionSet",
    "EngineConfig",
    "EnsembleClassifier",
    "Explanation",
    "HighLevelFeature",
    "MidLevelFeature",
    "NumericError",
    "SceneDataset",
    "SceneInstance",
    "SegmentationMap",
    "SoftmaxClassifier",
    "SubModel",
    "SyntheticWorldSpec",
    "TrisceneError",
    "build_high_level",
    "build_meta_input",
    "build_mid_level",
    "center_color",
    "compute_weights",
    "explain_scene",
    "generate_dataset",
    "grid_position",
    "load_checkpoint",
    "load_config",
    "mask_segment",
    "reference_config",
    "reference_world",
    "save_checkpoint",
    "save_config",
    "set_count",
]
