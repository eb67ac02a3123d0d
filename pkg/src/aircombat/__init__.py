"""Hierarchical multi-agent air combat: simulation, PPO training and explanation sweeps."""

__version__ = "0.1.0"
