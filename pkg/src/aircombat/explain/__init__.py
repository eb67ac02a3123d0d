"""Explanation harness: activation sweeps, frequency grids, reward decomposition, heatmaps."""

from .decompose import (
    COMPONENTS, DecomposedQ, QConfig, RewardComponents, component_transitions, decompose_returns,
    q_delta, train_decomposed_q,
)
from .grid import ExplanationGrid, aggregate, read_grid, write_grid
from .records import ActivationRecord, read_records, write_records
from .render import render_grid
from .sweeps import (
    GlobalSweepSpec, LocalSweepSpec, cell_seed, rule_commander, rule_mode, run_global_sweep,
    run_local_sweep, synthetic_observation,
)

__all__ = [
    "COMPONENTS", "ActivationRecord", "DecomposedQ", "ExplanationGrid", "GlobalSweepSpec",
    "LocalSweepSpec", "QConfig", "RewardComponents", "aggregate", "cell_seed",
    "component_transitions", "decompose_returns", "q_delta", "read_grid", "read_records",
    "render_grid", "rule_commander", "rule_mode", "run_global_sweep", "run_local_sweep",
    "synthetic_observation", "train_decomposed_q", "write_grid", "write_records",
]
