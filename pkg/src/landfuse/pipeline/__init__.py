"""Orchestration: config, dataset I/O, synthetic scenes, end-to-end runs and
report emission."""

from landfuse.pipeline.config import PipelineError, RunConfig, load_config
from landfuse.pipeline.io import DatasetBundle, export_bundle, load_bundle
from landfuse.pipeline.runs import (
    PostRunResult,
    PreRunResult,
    PreparedData,
    build_attribute_table,
    make_context,
    prepare,
    run_postclassification,
    run_preclassification,
)
from landfuse.pipeline.synth import generate_synthetic_scene

__all__ = [
    "DatasetBundle",
    "PipelineError",
    "PostRunResult",
    "PreRunResult",
    "PreparedData",
    "RunConfig",
    "build_attribute_table",
    "export_bundle",
    "generate_synthetic_scene",
    "load_bundle",
    "load_config",
    "make_context",
    "prepare",
    "run_postclassification",
    "run_preclassification",
]
