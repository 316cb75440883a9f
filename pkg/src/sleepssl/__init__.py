"""Self-supervised sleep-stage representation learning for single-channel EEG.

The package covers the full desk-scale pipeline: EDF/EDF+ ingestion,
preprocessing into 30 s epoch caches, dual-path masked-autoencoding plus
contrastive pretraining, a selective state-space temporal context module,
three downstream evaluation scenarios, ablation sweep harnesses, and a
synthetic data generator — all driven by the ``sleepssl`` CLI.
"""

from .errors import (
    ConfigError,
    CoverageGap,
    DegenerateCalibration,
    DegenerateSignal,
    HeaderFieldError,
    IoError,
    NumericalError,
    ParseError,
    ShapeError,
    SleepSSLError,
    UnknownStage,
    UnsupportedRate,
)
from .metrics import MetricsReport, compute_metrics
from .model import ModelConfig, SSLModel, preset_config
from .preprocess import StagedRecording, load_dataset, save_recording
from .synth import default_iid_spec, generate, markov_spec
from .train import load_pretrained, pretrain

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CoverageGap",
    "DegenerateCalibration",
    "DegenerateSignal",
    "HeaderFieldError",
    "IoError",
    "MetricsReport",
    "ModelConfig",
    "NumericalError",
    "ParseError",
    "SSLModel",
    "ShapeError",
    "SleepSSLError",
    "StagedRecording",
    "UnknownStage",
    "UnsupportedRate",
    "compute_metrics",
    "default_iid_spec",
    "generate",
    "load_dataset",
    "load_pretrained",
    "markov_spec",
    "preset_config",
    "pretrain",
    "save_recording",
    "__version__",
]
