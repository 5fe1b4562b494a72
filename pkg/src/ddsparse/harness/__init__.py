"""Experiment configuration, Monte-Carlo sweeps, and file formats."""

from .config import (
    DEFAULT_ESTIMATORS,
    PRESET_NAMES,
    ExperimentConfig,
    ablation_config,
    region_recovery_config,
)
from .io import (
    emit_plots_csv,
    export_ablation_csv,
    export_benchmark_csv,
    export_partition_csv,
    export_regions_csv,
    export_scenario_csv,
    export_spreading_csv,
    export_timing_csv,
    import_regions_csv,
    import_spreading_csv,
    nmse_db,
)
from .runner import (
    AblationRow,
    BenchmarkRow,
    SeedSystem,
    ablation_delta_db,
    delay_window_sweep,
    dispatch_estimator,
    inflate_regions,
    leakage_ablation,
    mean_nmse,
    nmse,
    realized_snr_db,
    run_benchmark,
)
from .cli import main

__all__ = [
    "AblationRow",
    "BenchmarkRow",
    "DEFAULT_ESTIMATORS",
    "ExperimentConfig",
    "PRESET_NAMES",
    "SeedSystem",
    "ablation_config",
    "ablation_delta_db",
    "delay_window_sweep",
    "dispatch_estimator",
    "emit_plots_csv",
    "export_ablation_csv",
    "export_benchmark_csv",
    "export_partition_csv",
    "export_regions_csv",
    "export_scenario_csv",
    "export_spreading_csv",
    "export_timing_csv",
    "import_regions_csv",
    "import_spreading_csv",
    "inflate_regions",
    "leakage_ablation",
    "main",
    "mean_nmse",
    "nmse",
    "nmse_db",
    "realized_snr_db",
    "region_recovery_config",
    "run_benchmark",
]
