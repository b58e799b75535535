"""Temporal-logic task compilation and automaton-guided reinforcement learning."""

__version__ = "0.1.0"
