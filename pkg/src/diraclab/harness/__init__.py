"""Experiment orchestration: strict config parsing, seeded work items,
parallel execution with per-item staging, CSV/JSON persistence, CLI."""

from .config import ExperimentConfig, load_config, validate_config
from .runner import RunManifest, run_experiment
from .io import export_results

__all__ = ["ExperimentConfig", "load_config", "validate_config",
           "RunManifest", "run_experiment", "export_results"]
