"""Orchestration of the multi-scale flow behind one configuration."""

from .compare import ModelRow, compare_models, format_table, model_variants
from .config import (
    PRESETS,
    ExtractionConfig,
    FitConfig,
    MacroConfig,
    PipelineConfig,
    load_pipeline_config,
    preset_dict,
)
from .run import STAGES, PipelineError, RunManifest, StageResult, file_digest, run_pipeline

__all__ = [
    "ExtractionConfig",
    "FitConfig",
    "MacroConfig",
    "ModelRow",
    "PRESETS",
    "PipelineConfig",
    "PipelineError",
    "RunManifest",
    "STAGES",
    "StageResult",
    "compare_models",
    "file_digest",
    "format_table",
    "load_pipeline_config",
    "model_variants",
    "preset_dict",
    "run_pipeline",
]
