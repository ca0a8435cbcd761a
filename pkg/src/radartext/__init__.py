"""Synthetic FMCW radar point clouds from human motion, tokenized for text models."""

from .fmcw_config import RadarConfig, default_config, derive

__all__ = ["RadarConfig", "default_config", "derive"]
__version__ = "0.1.0"
