"""Sliding-window BRNN autoencoder for IM/DD optical links, with PAM/MLSD baselines."""

from .autoencoder import AutoencoderDims, TransceiverParams, init_params
from .channel import ChannelConfig, IMDDChannel, channel_forward
from .config import ExperimentConfig, load_config
from .errors import ConfigurationError, TrainingDivergence
from .harness import run_sweep
from .trainer import TrainConfig, train

__all__ = [
    "AutoencoderDims", "TransceiverParams", "init_params", "ChannelConfig", "IMDDChannel", "channel_forward",
    "ExperimentConfig", "load_config", "ConfigurationError", "TrainingDivergence", "run_sweep",
    "TrainConfig", "train",
]
