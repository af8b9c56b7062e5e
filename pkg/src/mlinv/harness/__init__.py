"""Experiment harness: configuration, sweeps, CSV and SVG artifacts."""

from .config import (
    ExperimentConfig,
    MethodConfig,
    OutputConfig,
    ProblemConfig,
    SweepConfig,
    config_from_dict,
    load_config,
)
from .experiment import (
    CSV_FIELDS,
    ExperimentRecord,
    SweepContext,
    build_model,
    generate_problem,
    read_records_csv,
    records_to_csv,
    run_sweep,
    write_csv,
)
from .plot import emit_plot
from .presets import preset, preset_names

__all__ = [
    "ExperimentConfig",
    "MethodConfig",
    "OutputConfig",
    "ProblemConfig",
    "SweepConfig",
    "config_from_dict",
    "load_config",
    "CSV_FIELDS",
    "ExperimentRecord",
    "SweepContext",
    "build_model",
    "generate_problem",
    "read_records_csv",
    "records_to_csv",
    "run_sweep",
    "write_csv",
    "emit_plot",
    "preset",
    "preset_names",
]
