"""Simulator and analytics for collective average computation on
8-regular directed networks that rewire by random neighbor exchange."""

__version__ = "0.1.0"

from .analytics import (
    MetricsReport,
    clustering_coefficient,
    lattice_metrics_oracle,
    sampled_cpl,
    shortest_path_stats,
)
from .datagen import DistributionSpec, generate
from .dynamics import (
    ConvergenceTrace,
    DegenerateMeanError,
    PipelineError,
    RunConfig,
    average_step,
    convergence_b,
    frozen_pipeline,
    run,
    run_frozen,
    threshold_crossings,
)
from .graph import (
    ChurnError,
    LatticeSpec,
    RewireEvent,
    Topology,
    Violation,
    build_moore_lattice,
    delete_node,
    insert_node,
    load_edge_list,
    rewire_round,
    save_edge_list,
    swap_in_entries,
    validate,
)

__all__ = [
    "__version__",
    "ChurnError",
    "ConvergenceTrace",
    "DegenerateMeanError",
    "DistributionSpec",
    "LatticeSpec",
    "MetricsReport",
    "PipelineError",
    "RewireEvent",
    "RunConfig",
    "Topology",
    "Violation",
    "average_step",
    "build_moore_lattice",
    "clustering_coefficient",
    "convergence_b",
    "delete_node",
    "frozen_pipeline",
    "generate",
    "insert_node",
    "lattice_metrics_oracle",
    "load_edge_list",
    "rewire_round",
    "run",
    "run_frozen",
    "sampled_cpl",
    "save_edge_list",
    "shortest_path_stats",
    "swap_in_entries",
    "threshold_crossings",
    "validate",
]
