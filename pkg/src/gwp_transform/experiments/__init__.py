"""Experiment files and the drivers behind the CLI commands."""

from .config import ExperimentConfig, preset

__all__ = ["ExperimentConfig", "preset"]
