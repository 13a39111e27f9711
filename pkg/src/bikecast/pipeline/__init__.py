"""Configuration-driven pipeline: config parsing, stages, plots, CLI."""

from .config import ModelSpec, PipelineConfig, load_config

__all__ = ["ModelSpec", "PipelineConfig", "load_config"]
