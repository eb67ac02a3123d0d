"""Explaining a commander whose answer we already know.

A scripted commander picks attack when the nearest hostile shows its tail
(AA < 60) and sits in front of us (ATA < 60), defend when it comes head-on
(AA > 120), and engage otherwise. The local sweep probes it with synthetic
observations over a distance x ATA x AA grid; the argmax heatmaps should
draw exactly those regions. Then the same commander flies a few 3v3
episodes and its window rewards are split by mode.

    python3 demos/explain_rule_commander.py [out_dir]
"""

import sys

import numpy as np

from aircombat.agents import CommanderTeam, ControllerBank, PursuitTeam
from aircombat.engine.observe import LOW_LEVEL_OBS_WIDTH
from aircombat.engine.options import MODES
from aircombat.engine.types import ScenarioConfig
from aircombat.explain import (
    LocalSweepSpec, aggregate, decompose_returns, render_grid, rule_commander, rule_mode, run_local_sweep,
)
from aircombat.policy import build_controllers
from aircombat.runner import outcome_fractions, run_episodes

out_dir = sys.argv[1] if len(sys.argv) > 1 else "demo_out"

spec = LocalSweepSpec(samples_per_cell=20)
grid = aggregate(run_local_sweep(spec, rule_commander), spec.axes)
agree = sum(grid.argmax[idx] == rule_mode(ata, aa) for idx, (_, ata, aa) in grid.cells())
print(f"local sweep: {agree} of {grid.samples.size} cells match the rule")

# one distance slice as text: rows ATA, columns AA
d_index = 0
print(f"\nargmax at d = {spec.axes[0][1][d_index]} km (rows ATA, columns AA)")
print("      " + " ".join(f"{aa:>4}" for aa in spec.axes[2][1]))
for j, ata in enumerate(spec.axes[1][1]):
    print(f"{ata:>5} " + " ".join(f"{MODES[grid.argmax[d_index, j, k]][:4]:>4}" for k in range(grid.shape[2])))

paths = render_grid(grid, "d", out_dir, prefix="rule")
print(f"\nwrote {len(paths)} SVG slices to {out_dir}/")

# untrained controllers are enough to show the bookkeeping
controllers = build_controllers(LOW_LEVEL_OBS_WIDTH, rng=np.random.default_rng(0))
team = CommanderTeam(rule_commander, ControllerBank(controllers), 3)
episodes = run_episodes(ScenarioConfig(3, 3, max_ticks=300), team, PursuitTeam(), 8, seed=2)
print("\n3v3 vs pursuit:", outcome_fractions(episodes))
comp = decompose_returns(episodes)
for ep, parts in sorted(comp.per_episode.items()):
    split = "  ".join(f"{m} {v:+.2f}" for m, v in zip(comp.labels, parts))
    print(f"episode {ep}: total {comp.totals[ep]:+.2f} = {split}")
