"""Self-supervised recognition and correction of image orientation."""
from .config import ConfigError, TrainConfig, load_config, parse_config
from .estimators import CLAHETransformer, GeoNetClassifier, OrientationCorrector
from .neural import GeoNet, grad_check, load_checkpoint, save_checkpoint
from .orient import (
    compose_2d,
    composition_table,
    enumerate_2d,
    enumerate_3d,
    enumerate_serial,
    get_2d,
    inverse_2d,
    inverse_serial,
)
from .raster import apply_2d, apply_3d, apply_serial, clahe, histogram, resize_bilinear
from .trainer import evaluate, fix_orientation, predict_orientation, train

__version__ = "0.1.0"

__all__ = [
    "CLAHETransformer",
    "ConfigError",
    "GeoNet",
    "GeoNetClassifier",
    "OrientationCorrector",
    "TrainConfig",
    "apply_2d",
    "apply_3d",
    "apply_serial",
    "clahe",
    "compose_2d",
    "composition_table",
    "enumerate_2d",
    "enumerate_3d",
    "enumerate_serial",
    "evaluate",
    "fix_orientation",
    "get_2d",
    "grad_check",
    "histogram",
    "inverse_2d",
    "inverse_serial",
    "load_checkpoint",
    "load_config",
    "parse_config",
    "predict_orientation",
    "resize_bilinear",
    "save_checkpoint",
    "train",
]
